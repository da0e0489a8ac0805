"""Tree JSON wire schemas"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class NodeSchema(BaseModel):
    """One node of the canonical tree document"""

    model_config = ConfigDict(extra="forbid")

    id: int
    stage: int
    parent: Optional[int] = Field(...)
    value: List[float]
    cond_prob: float


class TreeSchema(BaseModel):
    """Canonical tree document: nodes sorted by id, fixed field order"""

    model_config = ConfigDict(extra="forbid")

    depth: int
    value_dim: int
    nodes: List[NodeSchema]
