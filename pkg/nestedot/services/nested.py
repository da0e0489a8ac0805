"""
Nested distance between scenario trees
Backward recursion over stage-wise node pairs with exact or entropic OT subproblems
"""

import logging
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from nestedot.core.config import settings
from nestedot.core.exceptions import ConvergenceException, StructureMismatchException
from nestedot.models.transport import NDResult, StageCostTable, TransportPlan
from nestedot.models.tree import ScenarioTree
from nestedot.services import entropic_ot, exact_ot, tree_service
from nestedot.utils.validators import validate_order

logger = logging.getLogger(__name__)

NodePair = Tuple[int, int]


def _check_compatible(X: ScenarioTree, Y: ScenarioTree) -> None:
    tree_service.ensure_valid(X, source="X")
    tree_service.ensure_valid(Y, source="Y")
    if X.depth != Y.depth:
        raise StructureMismatchException(f"depth mismatch: {X.depth} vs {Y.depth}")
    if X.value_dim != Y.value_dim:
        raise StructureMismatchException(
            f"value_dim mismatch: {X.value_dim} vs {Y.value_dim}"
        )


def path_cost_matrix(X: ScenarioTree, Y: ScenarioTree, r: float) -> np.ndarray:
    """l_r distance between full value paths, rows and columns by ascending leaf id"""
    r = validate_order(r)
    _check_compatible(X, Y)
    paths_x = tree_service.path_law(X).values
    paths_y = tree_service.path_law(Y).values
    return cdist(paths_x, paths_y, metric="minkowski", p=r)


class _Recursion(ABC):
    """Shared bookkeeping of the backward pass; subclasses solve one stage at a time"""

    entropic = False

    def __init__(self, X: ScenarioTree, Y: ScenarioTree, r: float):
        self.X = X
        self.Y = Y
        self.r = r
        self.tables: Dict[int, np.ndarray] = {}
        self.x_nodes = {t: X.stage_nodes(t) for t in range(1, X.depth + 1)}
        self.y_nodes = {t: Y.stage_nodes(t) for t in range(1, Y.depth + 1)}
        self.x_pos = {t: {node_id: i for i, node_id in enumerate(ids)} for t, ids in self.x_nodes.items()}
        self.y_pos = {t: {node_id: j for j, node_id in enumerate(ids)} for t, ids in self.y_nodes.items()}
        self.subproblems = 0
        self.rounded = 0
        self.max_shape = (1, 1)

    def _block(self, stage: int, a: int, b: int):
        """Children laws of (a, b) and the r-th power of the next-stage cost over their children"""
        kids_x = self.X.children(a)
        kids_y = self.Y.children(b)
        rows = [self.x_pos[stage + 1][k] for k in kids_x]
        cols = [self.y_pos[stage + 1][k] for k in kids_y]
        block = self.tables[stage + 1][np.ix_(rows, cols)] ** self.r
        p = tree_service.children_distribution(self.X, a).weights
        q = tree_service.children_distribution(self.Y, b).weights
        return p, q, block

    def _track(self, shape: Tuple[int, int]) -> None:
        self.subproblems += 1
        if shape[0] * shape[1] > self.max_shape[0] * self.max_shape[1]:
            self.max_shape = shape

    @abstractmethod
    def solve_stage(self, stage: int, pairs: List[NodePair], blocks: list) -> List[float]:
        """Values of the stage subproblems, one per node pair"""

    @abstractmethod
    def solve_top(self, cost: np.ndarray) -> Tuple[float, TransportPlan]:
        """Value and plan of the final root-level problem"""

    def run(self) -> NDResult:
        start = time.perf_counter()
        depth = self.X.depth
        self.tables[depth] = path_cost_matrix(self.X, self.Y, self.r)

        for stage in range(depth - 1, 0, -1):
            pairs = [(a, b) for a in self.x_nodes[stage] for b in self.y_nodes[stage]]
            blocks = [self._block(stage, a, b) for a, b in pairs]
            values = self.solve_stage(stage, pairs, blocks)

            table = np.empty((len(self.x_nodes[stage]), len(self.y_nodes[stage])))
            for (a, b), value in zip(pairs, values):
                table[self.x_pos[stage][a], self.y_pos[stage][b]] = max(value, 0.0) ** (1.0 / self.r)
            self.tables[stage] = table
            logger.debug(f"Stage {stage}: {len(pairs)} subproblems solved")

        # Roots are point masses, so the top level is a 1x1 transport
        root_cost = self.tables[1][
            np.ix_([self.x_pos[1][self.X.root.id]], [self.y_pos[1][self.Y.root.id]])
        ] ** self.r
        top_value, top_plan = self.solve_top(root_cost)
        self._track(root_cost.shape)

        stage_costs = StageCostTable(
            tables=self.tables, x_nodes=self.x_nodes, y_nodes=self.y_nodes
        )
        return NDResult(
            value=max(top_value, 0.0) ** (1.0 / self.r),
            stage_costs=stage_costs,
            top_plan=top_plan,
            subproblem_count=self.subproblems,
            wall_time=time.perf_counter() - start,
            max_subproblem_shape=self.max_shape,
            entropic=self.entropic,
            rounded_count=self.rounded,
            metadata=self.metadata(),
        )

    def metadata(self) -> Dict[str, object]:
        return {"r": self.r, "depth": self.X.depth}


class _ExactRecursion(_Recursion):
    def __init__(self, X, Y, r, method: str, workers: int):
        super().__init__(X, Y, r)
        self.method = method
        self.workers = workers

    def _solve(self, block) -> float:
        p, q, cost = block
        value, _ = exact_ot.solve_exact(p, q, cost, method=self.method)
        return value

    def solve_stage(self, stage, pairs, blocks):
        for _, _, cost in blocks:
            self._track(cost.shape)
        if self.workers > 1 and len(blocks) > 1:
            # map keeps input order, so the table is filled as in a sequential pass
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self._solve, blocks))
        return [self._solve(block) for block in blocks]

    def solve_top(self, cost):
        return exact_ot.solve_exact(np.ones(1), np.ones(1), cost, method=self.method)

    def metadata(self):
        return {**super().metadata(), "solver": "exact", "method": self.method, "workers": self.workers}


class _EntropicRecursion(_Recursion):
    entropic = True

    def __init__(self, X, Y, r, gamma_divisor, tol, max_iter, log_domain, on_max_iter):
        super().__init__(X, Y, r)
        self.gamma_divisor = gamma_divisor
        self.tol = tol
        self.max_iter = max_iter
        self.log_domain = log_domain
        self.on_max_iter = on_max_iter

    def solve_stage(self, stage, pairs, blocks):
        values: List[float] = [0.0] * len(blocks)
        pending: List[int] = []
        problems = []

        for k, (p, q, cost) in enumerate(blocks):
            self._track(cost.shape)
            gamma = entropic_ot.gamma_heuristic(cost, self.gamma_divisor)
            if gamma is None:
                continue
            if self.log_domain:
                pending.append(k)
                problems.append((p, q, cost, gamma))
                continue
            try:
                outcome = entropic_ot.solve_regularized(
                    p, q, cost, self.gamma_divisor, self.tol, self.max_iter,
                    log_domain=False, on_max_iter=self.on_max_iter,
                )
            except ConvergenceException as e:
                raise e.locate(stage, pairs[k]) from e
            self.rounded += int(outcome.rounded)
            values[k] = outcome.value

        try:
            results = entropic_ot.sinkhorn_batch(
                problems, tol=self.tol, max_iter=self.max_iter, on_max_iter=self.on_max_iter
            )
        except ConvergenceException as e:
            raise e.locate(stage, pairs[pending[e.index]]) from e

        for k, result in zip(pending, results):
            self.rounded += int(result.rounded)
            values[k] = result.reg_cost
        return values

    def solve_top(self, cost):
        try:
            outcome = entropic_ot.solve_regularized(
                np.ones(1), np.ones(1), cost, self.gamma_divisor, self.tol, self.max_iter,
                log_domain=self.log_domain, on_max_iter=self.on_max_iter,
            )
        except ConvergenceException as e:
            raise e.locate(1, (self.X.root.id, self.Y.root.id)) from e
        self.rounded += int(outcome.rounded)
        return outcome.value, outcome.plan

    def metadata(self):
        return {
            **super().metadata(),
            "solver": "entropic",
            "gamma_divisor": self.gamma_divisor,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "log_domain": self.log_domain,
            "on_max_iter": self.on_max_iter,
        }


def nested_distance(
    X: ScenarioTree,
    Y: ScenarioTree,
    r: float = 1.0,
    method: Optional[str] = None,
    workers: Optional[int] = None,
) -> NDResult:
    """
    Nested distance ND_r by backward recursion with exact OT subproblems

    Args:
        X, Y: Valid trees of equal depth and value dimension
        r: Norm order of the ground metric and transport order
        method: Exact backend, "simplex" or "highs"
        workers: Threads solving the independent subproblems of a stage

    Returns:
        NDResult with the per-stage cost tables
    """
    r = validate_order(r)
    _check_compatible(X, Y)
    method = method or settings.EXACT_METHOD
    workers = settings.THREADS if workers is None else max(1, int(workers))

    result = _ExactRecursion(X, Y, r, method, workers).run()
    logger.info(
        f"ND_{r:g} = {result.value:.12g} ({result.subproblem_count} subproblems, "
        f"{result.wall_time * 1e3:.1f} ms)"
    )
    return result


def entropic_nested_distance(
    X: ScenarioTree,
    Y: ScenarioTree,
    r: float = 1.0,
    gamma_divisor: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    log_domain: Optional[bool] = None,
    on_max_iter: str = "raise",
) -> NDResult:
    """
    Entropic nested distance END_r

    Same recursion as ``nested_distance`` with every OT replaced by its
    entropic regularization, gamma = max(cost block) / gamma_divisor per
    subproblem. Numerically zero blocks contribute 0. An upper bound of ND_r.
    """
    r = validate_order(r)
    _check_compatible(X, Y)
    gamma_divisor = settings.GAMMA_DIVISOR if gamma_divisor is None else float(gamma_divisor)
    tol = settings.SINKHORN_TOL if tol is None else tol
    max_iter = settings.SINKHORN_MAX_ITER if max_iter is None else max_iter
    log_domain = settings.SINKHORN_LOG_DOMAIN if log_domain is None else log_domain

    result = _EntropicRecursion(
        X, Y, r, gamma_divisor, tol, max_iter, log_domain, on_max_iter
    ).run()
    if result.rounded_count:
        logger.warning(
            f"END_{r:g}: {result.rounded_count} subproblems hit max_iter and were rounded"
        )
    logger.info(
        f"END_{r:g} = {result.value:.12g} ({result.subproblem_count} subproblems, "
        f"{result.wall_time * 1e3:.1f} ms)"
    )
    return result


def wasserstein_paths(
    X: ScenarioTree, Y: ScenarioTree, r: float = 1.0, method: Optional[str] = None
) -> float:
    """W_r between the two path laws under the l_r path metric, ignoring filtrations"""
    cost = path_cost_matrix(X, Y, r)
    law_x = tree_service.path_law(X)
    law_y = tree_service.path_law(Y)
    return exact_ot.wasserstein(law_x.probabilities, law_y.probabilities, cost, r, method=method)


def count_subproblems(X: ScenarioTree, Y: ScenarioTree) -> int:
    """Non-leaf node pairs at equal stages, plus the top-level problem"""
    return sum(
        len(X.stage_nodes(t)) * len(Y.stage_nodes(t)) for t in range(1, X.depth)
    ) + 1
