"""Benchmark schemas"""

from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

BENCH_COLUMNS = [
    "depth",
    "mean_time_nd_ms",
    "mean_time_end_ms",
    "speedup",
    "relative_error_pct",
]

PAIR_COLUMNS = [
    "depth",
    "run",
    "seed_x",
    "seed_y",
    "nd",
    "end",
    "time_nd_ms",
    "time_end_ms",
    "relative_error_pct",
    "subproblems",
    "rounded_subproblems",
    "status",
    "error",
]


class BenchConfig(BaseModel):
    """Speedup / relative-error experiment parameters"""

    model_config = ConfigDict(frozen=True)

    depths: List[int] = Field(..., min_length=1)
    runs: int = Field(10, ge=1)
    max_children: int = Field(3, ge=1)
    value_dim: int = Field(3, ge=1)
    increment_scale: float = Field(1.0, gt=0)
    root_scale: float = Field(1.0, ge=0)
    r: float = Field(2.0, ge=1)
    gamma_divisor: float = Field(30.0, gt=0)
    seed: int = Field(0, ge=0)
    tol: float = Field(1e-9, gt=0)
    max_iter: int = Field(1000, ge=1)
    on_max_iter: Literal["raise", "round"] = "round"
    exact_method: Literal["simplex", "highs"] = "highs"
    workers: int = Field(1, ge=1)
    output: Optional[Path] = None
    raw_output: Optional[Path] = None

    @field_validator("depths")
    @classmethod
    def validate_depths(cls, v):
        if any(depth < 1 for depth in v):
            raise ValueError("depths must be positive")
        return v


class BenchPairRow(BaseModel):
    """Raw measurement for one tree pair"""

    depth: int
    run: int
    seed_x: int
    seed_y: int
    nd: Optional[float] = None
    end: Optional[float] = None
    time_nd_ms: Optional[float] = None
    time_end_ms: Optional[float] = None
    relative_error_pct: Optional[float] = None
    subproblems: Optional[int] = None
    rounded_subproblems: Optional[int] = None
    status: Literal["ok", "failed"] = "ok"
    error: str = ""


class BenchRow(BaseModel):
    """Per-depth averages; relative error is (END - ND) / END in percent"""

    depth: int
    mean_time_nd_ms: float
    mean_time_end_ms: float
    speedup: float
    relative_error_pct: float
