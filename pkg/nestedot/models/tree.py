"""Scenario tree domain objects"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from nestedot.core.exceptions import NodeNotFoundException


@dataclass(frozen=True)
class Node:
    """A valued node; cond_prob is the probability of the node given its parent"""

    id: int
    stage: int
    value: Tuple[float, ...]
    cond_prob: float
    parent_id: Optional[int] = None


@dataclass(frozen=True)
class ScenarioTree:
    """
    Rooted tree of valued nodes with conditional transition probabilities

    Stages run 1..depth. Construction does not validate; use
    ``tree_service.validate`` for the invariant check.
    """

    depth: int
    value_dim: int
    nodes: Tuple[Node, ...]

    def __post_init__(self):
        # Canonical order is ascending id
        ordered = tuple(sorted(self.nodes, key=lambda node: node.id))
        object.__setattr__(self, "nodes", ordered)

    @cached_property
    def _by_id(self) -> Dict[int, Node]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def _children(self) -> Dict[int, Tuple[int, ...]]:
        children: Dict[int, List[int]] = {node.id: [] for node in self.nodes}
        for node in self.nodes:
            if node.parent_id is not None and node.parent_id in children:
                children[node.parent_id].append(node.id)
        return {node_id: tuple(ids) for node_id, ids in children.items()}

    @cached_property
    def _stages(self) -> Dict[int, Tuple[int, ...]]:
        stages: Dict[int, List[int]] = {}
        for node in self.nodes:
            stages.setdefault(node.stage, []).append(node.id)
        return {stage: tuple(ids) for stage, ids in stages.items()}

    def node(self, node_id: int) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise NodeNotFoundException(node_id) from None

    def children(self, node_id: int) -> Tuple[int, ...]:
        """Child ids in ascending order"""
        self.node(node_id)
        return self._children[node_id]

    def is_leaf(self, node_id: int) -> bool:
        return not self.children(node_id)

    @property
    def roots(self) -> Tuple[int, ...]:
        return tuple(node.id for node in self.nodes if node.parent_id is None)

    @property
    def root(self) -> Node:
        return self._by_id[self.roots[0]]

    @property
    def leaves(self) -> Tuple[int, ...]:
        return tuple(node.id for node in self.nodes if not self._children[node.id])

    def stage_nodes(self, stage: int) -> Tuple[int, ...]:
        """Ids of the nodes at a stage, ascending"""
        return self._stages.get(stage, ())

    def ancestry(self, node_id: int) -> Tuple[int, ...]:
        """Root-to-node id path"""
        path = [node_id]
        node = self.node(node_id)
        while node.parent_id is not None and len(path) <= self.size:
            node = self.node(node.parent_id)
            path.append(node.id)
        return tuple(reversed(path))

    def path_values(self, node_id: int) -> np.ndarray:
        """Concatenated values along the root-to-node path"""
        return np.concatenate(
            [np.asarray(self._by_id[i].value, dtype=np.float64) for i in self.ancestry(node_id)]
        )

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class PathLaw:
    """Law of the full process: one (value path, probability) entry per leaf"""

    leaf_ids: Tuple[int, ...]
    paths: Tuple[Tuple[Tuple[float, ...], float], ...]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([prob for _, prob in self.paths], dtype=np.float64)

    @property
    def values(self) -> np.ndarray:
        """Leaf-by-(T*N) matrix of value paths"""
        return np.array([values for values, _ in self.paths], dtype=np.float64)

    def as_dict(self) -> Dict[Tuple[float, ...], float]:
        return {values: prob for values, prob in self.paths}

    def __len__(self) -> int:
        return len(self.paths)
