"""
Brute-force transportation oracle
Enumerates every basic solution of the transportation polytope; used to cross-check the solvers
"""

from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nestedot.core.exceptions import OracleTooLargeException
from nestedot.models.transport import as_distribution
from nestedot.utils.validators import validate_cost_matrix, validate_shapes

Cell = Tuple[int, int]

ORACLE_LIMIT = 8
FEASIBILITY_SLACK = 1e-12


def _is_spanning_tree(cells: Sequence[Cell], n: int, m: int) -> bool:
    """n + m - 1 cells span the bipartite graph iff they close no cycle"""
    parent = list(range(n + m))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in cells:
        a, b = find(i), find(n + j)
        if a == b:
            return False
        parent[a] = b
    return True


def _tree_flows(cells: Sequence[Cell], p: np.ndarray, q: np.ndarray) -> Optional[Dict[Cell, float]]:
    """Peel leaves of the basis tree; each leaf edge carries its endpoint's residual"""
    supply = p.astype(np.float64).copy()
    demand = q.astype(np.float64).copy()
    remaining: List[Cell] = sorted(cells)
    flows: Dict[Cell, float] = {}

    while remaining:
        for cell in remaining:
            i, j = cell
            if sum(1 for a, _ in remaining if a == i) == 1:
                amount = supply[i]
            elif sum(1 for _, b in remaining if b == j) == 1:
                amount = demand[j]
            else:
                continue
            flows[cell] = float(amount)
            supply[i] -= amount
            demand[j] -= amount
            remaining.remove(cell)
            break
        else:
            return None

    return flows


def oracle_exact(p, q, c, limit: int = ORACLE_LIMIT) -> float:
    """
    Minimum cost over all basic feasible solutions

    Only usable for n + m <= limit; the number of candidate bases grows
    combinatorially.
    """
    p = as_distribution(p).weights
    q = as_distribution(q).weights
    cost = validate_cost_matrix(c)
    n, m = validate_shapes(p.size, q.size, cost)
    if n + m > limit:
        raise OracleTooLargeException(n, m, limit)

    all_cells = [(i, j) for i in range(n) for j in range(m)]
    best = np.inf
    for cells in combinations(all_cells, n + m - 1):
        if not _is_spanning_tree(cells, n, m):
            continue
        flows = _tree_flows(cells, p, q)
        if flows is None or min(flows.values()) < -FEASIBILITY_SLACK:
            continue
        best = min(best, sum(cost[cell] * max(x, 0.0) for cell, x in flows.items()))

    return float(best)
