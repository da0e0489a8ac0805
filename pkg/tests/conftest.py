"""Shared fixtures for the nestedot test suite"""

from typing import Callable, Sequence

import numpy as np
import pytest

from nestedot.models.tree import Node, ScenarioTree
from nestedot.schemas.solver import GenSpec
from nestedot.services import tree_service


def chain_tree(values: Sequence[float]) -> ScenarioTree:
    """One node per stage, each the only child of the previous one"""
    nodes = tuple(
        Node(id=k, stage=k + 1, value=(float(x),), cond_prob=1.0, parent_id=None if k == 0 else k - 1)
        for k, x in enumerate(values)
    )
    return ScenarioTree(depth=len(values), value_dim=1, nodes=nodes)


def random_law(rng: np.random.Generator, size: int) -> np.ndarray:
    weights = rng.random(size) + 0.05
    return weights / weights.sum()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def gap_trees():
    """Information-gap pair with amplitude 1 and epsilon 0.1"""
    return tree_service.information_gap_pair(amplitude=1.0, epsilon=0.1)


@pytest.fixture
def single_node_tree() -> ScenarioTree:
    return ScenarioTree(depth=1, value_dim=1, nodes=(Node(0, 1, (0.0,), 1.0, None),))


@pytest.fixture
def make_tree() -> Callable[..., ScenarioTree]:
    def factory(depth: int, seed: int, max_children: int = 3, value_dim: int = 1) -> ScenarioTree:
        return tree_service.generate(
            GenSpec(depth=depth, max_children=max_children, value_dim=value_dim, seed=seed)
        )

    return factory
