"""Transport domain objects: distributions, plans, solver results"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from nestedot.utils.validators import validate_weights


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite probability vector paired with its support labels"""

    weights: np.ndarray
    support: Tuple[int, ...] = ()

    def __post_init__(self):
        weights = validate_weights(self.weights)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if not self.support:
            object.__setattr__(self, "support", tuple(range(weights.size)))
        elif len(self.support) != weights.size:
            raise ValueError("support and weights differ in length")

    @classmethod
    def uniform(cls, size: int) -> "DiscreteDistribution":
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return int(self.weights.size)

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.support, self.weights.tolist()))


def as_distribution(value) -> DiscreteDistribution:
    """Accept a DiscreteDistribution or a raw weight vector"""
    if isinstance(value, DiscreteDistribution):
        return value
    return DiscreteDistribution(np.asarray(value, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling matrix with its L1 marginal violations"""

    entries: np.ndarray
    row_marginal_err: float
    col_marginal_err: float

    @classmethod
    def from_entries(cls, entries: np.ndarray, p: np.ndarray, q: np.ndarray) -> "TransportPlan":
        entries = np.asarray(entries, dtype=np.float64)
        row_err = float(np.abs(entries.sum(axis=1) - p).sum())
        col_err = float(np.abs(entries.sum(axis=0) - q).sum())
        return cls(entries=entries, row_marginal_err=row_err, col_marginal_err=col_err)

    @property
    def marginal_err(self) -> float:
        return max(self.row_marginal_err, self.col_marginal_err)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def cost(self, cost: np.ndarray) -> float:
        return float(np.sum(cost * self.entries))


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    """
    Regularized plan in factorized form

    ``plan = diag(u) G diag(v)``; ``log_u``/``log_v`` are kept because
    ``u``/``v`` may leave the float range for small gamma.
    """

    plan: TransportPlan
    u: np.ndarray
    v: np.ndarray
    log_u: np.ndarray
    log_v: np.ndarray
    gamma: float
    iterations: int
    marginal_err: float
    reg_cost: float
    objective: float
    converged: bool = True
    rounded: bool = False


@dataclass(frozen=True, eq=False)
class RegularizedOT:
    """Outcome of one entropic subproblem, including the zero-cost shortcut"""

    value: float
    plan: TransportPlan
    gamma: Optional[float]
    result: Optional[SinkhornResult] = None

    @property
    def degenerate(self) -> bool:
        return self.gamma is None

    @property
    def rounded(self) -> bool:
        return self.result is not None and self.result.rounded


@dataclass(frozen=True, eq=False)
class StageCostTable:
    """Per-stage c_t tables indexed by (X node at t) x (Y node at t)"""

    tables: Dict[int, np.ndarray]
    x_nodes: Dict[int, Tuple[int, ...]]
    y_nodes: Dict[int, Tuple[int, ...]]

    def table(self, stage: int) -> np.ndarray:
        return self.tables[stage]

    def cost(self, stage: int, x_id: int, y_id: int) -> float:
        i = self.x_nodes[stage].index(x_id)
        j = self.y_nodes[stage].index(y_id)
        return float(self.tables[stage][i, j])

    @property
    def stages(self) -> Sequence[int]:
        return sorted(self.tables)

    def to_dict(self) -> Dict[str, dict]:
        return {
            str(stage): {
                "x_nodes": list(self.x_nodes[stage]),
                "y_nodes": list(self.y_nodes[stage]),
                "costs": self.tables[stage].tolist(),
            }
            for stage in self.stages
        }


@dataclass(frozen=True, eq=False)
class NDResult:
    """Value of the nested recursion with its intermediate tables"""

    value: float
    stage_costs: StageCostTable
    top_plan: TransportPlan
    subproblem_count: int
    wall_time: float
    max_subproblem_shape: Tuple[int, int] = (1, 1)
    entropic: bool = False
    rounded_count: int = 0
    metadata: Dict[str, object] = field(default_factory=dict)
