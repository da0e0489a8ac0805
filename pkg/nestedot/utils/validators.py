"""Array validators shared by the solvers"""

from typing import Any, Optional, Tuple

import numpy as np

from nestedot.core.config import settings
from nestedot.core.exceptions import (
    DimensionMismatchException,
    InvalidCostException,
    InvalidDistributionException,
    NonFiniteCostException,
)


def validate_weights(weights: Any, tolerance: Optional[float] = None) -> np.ndarray:
    """Validate and normalize a probability vector to a float64 array"""
    tolerance = settings.PROBABILITY_TOLERANCE if tolerance is None else tolerance
    array = np.asarray(weights, dtype=np.float64)

    if array.ndim != 1 or array.size == 0:
        raise InvalidDistributionException(
            f"weights must be a non-empty vector, got shape {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise InvalidDistributionException("weights must be finite")
    if np.any(array <= 0.0):
        raise InvalidDistributionException("weights must be strictly positive")

    total = float(array.sum())
    if abs(total - 1.0) > tolerance:
        raise InvalidDistributionException(
            f"weights sum to {total!r}, expected 1 within {tolerance:g}"
        )
    return array


def validate_cost_matrix(cost: Any) -> np.ndarray:
    """Validate a dense nonnegative finite cost matrix"""
    array = np.asarray(cost, dtype=np.float64)

    if array.ndim != 2 or 0 in array.shape:
        raise InvalidCostException(f"cost must be a non-empty matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFiniteCostException()
    if np.any(array < 0.0):
        raise InvalidCostException("cost matrix has negative entries")
    return array


def validate_shapes(n: int, m: int, cost: np.ndarray) -> Tuple[int, int]:
    """Check that an n x m problem matches its cost matrix"""
    if cost.shape != (n, m):
        raise DimensionMismatchException((n, m), cost.shape)
    return n, m


def validate_order(r: float) -> float:
    """Wasserstein / norm order must be at least one"""
    r = float(r)
    if not np.isfinite(r) or r < 1.0:
        raise ValueError(f"order r must be >= 1, got {r}")
    return r
