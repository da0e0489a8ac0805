"""Solver and generator configuration schemas"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from nestedot.core.config import settings

MAX_SEED = 2**64 - 1


class GenSpec(BaseModel):
    """Random scenario tree generation parameters"""

    model_config = ConfigDict(frozen=True)

    depth: int = Field(..., ge=1, description="Number of stages T")
    max_children: int = Field(3, ge=1, description="Upper bound K on children per node")
    value_dim: int = Field(1, ge=1, description="Dimension N of node values")
    seed: int = Field(0, ge=0, le=MAX_SEED)
    increment_scale: float = Field(1.0, gt=0)
    root_scale: float = Field(1.0, ge=0, description="Root value standard deviation; 0 pins the root at the origin")


class SinkhornConfig(BaseModel):
    """Entropic solver parameters"""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., gt=0, description="Regularization strength")
    tol: float = Field(default_factory=lambda: settings.SINKHORN_TOL, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.SINKHORN_MAX_ITER, ge=1)
    log_domain: bool = Field(default_factory=lambda: settings.SINKHORN_LOG_DOMAIN)
    on_max_iter: Literal["raise", "round"] = "raise"
