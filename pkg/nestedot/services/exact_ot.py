"""
Exact discrete optimal transport
Transportation simplex on the spanning-tree basis, with HiGHS as an alternative backend
"""

import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from nestedot.core.config import settings
from nestedot.core.exceptions import SolverException
from nestedot.models.transport import TransportPlan, as_distribution
from nestedot.utils.validators import validate_cost_matrix, validate_order, validate_shapes

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

EXACT_METHODS = ("simplex", "highs")


class TransportationSimplex:
    """
    Primal simplex specialised to the transportation polytope

    The basis is always a spanning tree of the bipartite row/column graph
    (n + m - 1 cells, degenerate zeros included). Entering and leaving cells
    follow the lowest-index rule, which rules out cycling on degenerate
    pivots and makes the pivot sequence a function of the input alone.
    """

    def __init__(
        self,
        p: np.ndarray,
        q: np.ndarray,
        cost: np.ndarray,
        tolerance: Optional[float] = None,
        max_pivots: Optional[int] = None,
    ):
        self.p = p
        self.q = q
        self.cost = cost
        self.n, self.m = cost.shape
        scale = max(1.0, float(cost.max()))
        self.tolerance = tolerance if tolerance is not None else 1e-12 * scale
        self.max_pivots = max_pivots or 100 * self.n * self.m + 1000
        self.pivots = 0

    def _initial_basis(self) -> Tuple[np.ndarray, List[Cell]]:
        """North-west corner rule; ties advance the row so the staircase stays a tree"""
        flow = np.zeros((self.n, self.m))
        supply = self.p.copy()
        demand = self.q.copy()
        basis: List[Cell] = []

        i = j = 0
        while True:
            amount = max(min(supply[i], demand[j]), 0.0)
            flow[i, j] = amount
            basis.append((i, j))
            supply[i] -= amount
            demand[j] -= amount

            if i == self.n - 1 and j == self.m - 1:
                break
            if j == self.m - 1 or (i < self.n - 1 and supply[i] <= demand[j]):
                i += 1
            else:
                j += 1

        return flow, basis

    def _potentials(self, basis: List[Cell]) -> Tuple[np.ndarray, np.ndarray]:
        """Solve u_i + v_j = c_ij over the basis tree with u_0 = 0"""
        by_row: List[List[int]] = [[] for _ in range(self.n)]
        by_col: List[List[int]] = [[] for _ in range(self.m)]
        for i, j in basis:
            by_row[i].append(j)
            by_col[j].append(i)

        u = np.full(self.n, np.nan)
        v = np.full(self.m, np.nan)
        u[0] = 0.0
        queue = deque([(0, True)])
        while queue:
            k, is_row = queue.popleft()
            if is_row:
                for j in by_row[k]:
                    if np.isnan(v[j]):
                        v[j] = self.cost[k, j] - u[k]
                        queue.append((j, False))
            else:
                for i in by_col[k]:
                    if np.isnan(u[i]):
                        u[i] = self.cost[i, k] - v[k]
                        queue.append((i, True))

        if np.isnan(u).any() or np.isnan(v).any():
            raise SolverException("basis is not a spanning tree")
        return u, v

    def _entering(self, u: np.ndarray, v: np.ndarray) -> Optional[Cell]:
        reduced = self.cost - u[:, None] - v[None, :]
        candidates = np.flatnonzero(reduced.ravel() < -self.tolerance)
        if candidates.size == 0:
            return None
        i, j = divmod(int(candidates[0]), self.m)
        return i, j

    def _cycle(self, basis: List[Cell], entering: Cell) -> List[Cell]:
        """
        Cells of the pivot cycle, starting with the entering cell

        Rows are graph nodes 0..n-1 and columns n..n+m-1. The tree path from
        the entering column back to the entering row closes the cycle.
        """
        adjacency: List[List[int]] = [[] for _ in range(self.n + self.m)]
        for i, j in basis:
            adjacency[i].append(self.n + j)
            adjacency[self.n + j].append(i)

        row, col = entering
        start, target = self.n + col, row
        parent = {start: -1}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == target:
                break
            for neighbour in adjacency[node]:
                if neighbour not in parent:
                    parent[neighbour] = node
                    queue.append(neighbour)

        if target not in parent:
            raise SolverException(f"no basis path closes a cycle through cell {entering}")

        # Walk target -> start, then reverse so the path leaves the entering column first
        nodes = [target]
        while nodes[-1] != start:
            nodes.append(parent[nodes[-1]])
        nodes.reverse()

        cycle = [entering]
        for a, b in zip(nodes, nodes[1:]):
            i, j = (a, b - self.n) if a < self.n else (b, a - self.n)
            cycle.append((i, j))
        return cycle

    def solve(self) -> np.ndarray:
        flow, basis = self._initial_basis()

        while True:
            u, v = self._potentials(basis)
            entering = self._entering(u, v)
            if entering is None:
                break
            if self.pivots >= self.max_pivots:
                raise SolverException(
                    f"transportation simplex exceeded {self.max_pivots} pivots"
                )

            cycle = self._cycle(basis, entering)
            donors = cycle[1::2]
            leaving = min(donors, key=lambda cell: (flow[cell], cell[0] * self.m + cell[1]))
            theta = flow[leaving]

            for k, cell in enumerate(cycle):
                flow[cell] += -theta if k % 2 else theta
            flow[leaving] = 0.0
            basis.remove(leaving)
            basis.append(entering)
            self.pivots += 1

        logger.debug(f"Transportation simplex {self.n}x{self.m} optimal after {self.pivots} pivots")
        return flow


def _solve_highs(p: np.ndarray, q: np.ndarray, cost: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    a_eq = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    b_eq = np.concatenate([p, q])

    # The last column constraint is implied by the others
    result = linprog(
        cost.ravel(),
        A_eq=a_eq[:-1],
        b_eq=b_eq[:-1],
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if result.status != 0:
        raise SolverException(f"HiGHS failed: {result.message}")
    return np.clip(result.x.reshape(n, m), 0.0, None)


def solve_exact(p, q, c, method: Optional[str] = None) -> Tuple[float, TransportPlan]:
    """
    Minimum-cost coupling of two discrete laws

    Args:
        p: Source law (DiscreteDistribution or weight vector)
        q: Target law
        c: Nonnegative finite n x m cost matrix
        method: "simplex" (default from settings) or "highs"

    Returns:
        (optimal value, optimal plan)
    """
    method = method or settings.EXACT_METHOD
    if method not in EXACT_METHODS:
        raise ValueError(f"unknown exact method {method!r}, expected one of {EXACT_METHODS}")

    p = as_distribution(p).weights
    q = as_distribution(q).weights
    cost = validate_cost_matrix(c)
    validate_shapes(p.size, q.size, cost)

    if method == "highs":
        flow = _solve_highs(p, q, cost)
    else:
        flow = TransportationSimplex(p, q, cost).solve()

    plan = TransportPlan.from_entries(flow, p, q)
    if plan.marginal_err > settings.MARGINAL_TOLERANCE:
        raise SolverException(
            f"{method} plan violates marginals by {plan.marginal_err:.3e}"
        )
    return plan.cost(cost), plan


def wasserstein(p, q, c, r: float = 1.0, method: Optional[str] = None) -> float:
    """W_r between two laws given the ground distances c"""
    r = validate_order(r)
    cost = validate_cost_matrix(c) ** r
    value, _ = solve_exact(p, q, cost, method=method)
    return value ** (1.0 / r)
