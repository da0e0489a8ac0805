"""
Transport plan export
Regularized plans for several gammas and their thresholded edge lists, for plan-diffuseness plots
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from nestedot.core.exceptions import CsvSchemaException, StructureMismatchException
from nestedot.models.tree import ScenarioTree
from nestedot.schemas.solver import SinkhornConfig
from nestedot.services import tree_service
from nestedot.services.entropic_ot import sinkhorn
from nestedot.utils.validators import validate_order, validate_weights

logger = logging.getLogger(__name__)

PLAN_COLUMNS = ["gamma", "source", "target", "mass"]
EDGE_COLUMNS = ["gamma", "threshold", "source", "target", "mass", "share"]
DEFAULT_THRESHOLDS = (0.3, 0.2)

_COORDINATE = re.compile(r"^x(\d+)$")


def load_point_cloud(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a weighted point cloud

    Columns x0..x{N-1} hold coordinates; an optional ``weight`` column holds
    positive masses, normalized on load. Without it the cloud is uniform.
    """
    frame = pd.read_csv(path)
    coordinates = sorted(
        (int(match.group(1)), column)
        for column in frame.columns
        if (match := _COORDINATE.match(str(column)))
    )
    expected = [f"x{k}" for k in range(len(coordinates))]
    if not coordinates or [column for _, column in coordinates] != expected:
        raise CsvSchemaException(str(path), expected or ["x0"], [str(c) for c in frame.columns])

    points = frame[expected].to_numpy(dtype=np.float64)
    if "weight" in frame.columns:
        raw = frame["weight"].to_numpy(dtype=np.float64)
        weights = validate_weights(raw / raw.sum())
    else:
        weights = np.full(len(frame), 1.0 / len(frame))
    return points, weights


def point_cost(xs: np.ndarray, ys: np.ndarray, r: float = 2.0) -> np.ndarray:
    """||x - y||_r ** r between every pair of points"""
    r = validate_order(r)
    if xs.shape[1] != ys.shape[1]:
        raise StructureMismatchException(
            f"point dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}"
        )
    return cdist(xs, ys, metric="minkowski", p=r) ** r


def tree_problem(
    X: ScenarioTree, Y: ScenarioTree, r: float = 2.0
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Tuple[int, ...], Tuple[int, ...]]:
    """Path laws of two trees with the r-th power path cost; labels are leaf ids"""
    law_x = tree_service.path_law(X)
    law_y = tree_service.path_law(Y)
    cost = point_cost(law_x.values, law_y.values, r)
    return law_x.probabilities, law_y.probabilities, cost, law_x.leaf_ids, law_y.leaf_ids


def threshold_edges(plan: np.ndarray, p: np.ndarray, theta: float) -> List[Tuple[int, int]]:
    """Cells carrying at least theta of their source mass"""
    rows, cols = np.nonzero(plan >= theta * p[:, None])
    return list(zip(rows.tolist(), cols.tolist()))


def export_plans(
    p: np.ndarray,
    q: np.ndarray,
    cost: np.ndarray,
    gammas: Sequence[float],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    sources: Optional[Sequence[int]] = None,
    targets: Optional[Sequence[int]] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    log_domain: Optional[bool] = None,
) -> Tuple[List[Dict[str, float]], List[Dict[str, float]]]:
    """
    Solve the regularized problem once per gamma

    Returns:
        (plan rows, edge rows) matching PLAN_COLUMNS and EDGE_COLUMNS
    """
    sources = list(sources) if sources is not None else list(range(len(p)))
    targets = list(targets) if targets is not None else list(range(len(q)))
    options = {
        key: value
        for key, value in (("tol", tol), ("max_iter", max_iter), ("log_domain", log_domain))
        if value is not None
    }

    plan_rows: List[Dict[str, float]] = []
    edge_rows: List[Dict[str, float]] = []
    for gamma in gammas:
        result = sinkhorn(p, q, cost, SinkhornConfig(gamma=gamma, **options))
        entries = result.plan.entries

        for i, j in np.ndindex(entries.shape):
            plan_rows.append(
                {"gamma": gamma, "source": sources[i], "target": targets[j], "mass": float(entries[i, j])}
            )
        for theta in thresholds:
            edges = threshold_edges(entries, p, theta)
            for i, j in edges:
                edge_rows.append(
                    {
                        "gamma": gamma,
                        "threshold": theta,
                        "source": sources[i],
                        "target": targets[j],
                        "mass": float(entries[i, j]),
                        "share": float(entries[i, j] / p[i]),
                    }
                )
            logger.info(f"gamma={gamma:g} threshold={theta:g}: {len(edges)} edges")

    return plan_rows, edge_rows
