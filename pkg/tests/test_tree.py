"""Tests for the scenario tree model and service"""

import json
import math

import numpy as np
import pytest

from nestedot.core.exceptions import (
    NoChildrenException,
    NodeNotFoundException,
    TreeParseException,
    TreeSchemaException,
    TreeValidationException,
)
from nestedot.models.tree import Node, ScenarioTree
from nestedot.schemas.solver import GenSpec
from nestedot.services import tree_service
from tests.conftest import chain_tree


class TestValidate:
    def test_single_node_tree_is_valid(self, single_node_tree):
        assert tree_service.validate(single_node_tree) == []

    def test_children_not_summing_to_one(self):
        tree = ScenarioTree(
            depth=2,
            value_dim=1,
            nodes=(
                Node(0, 1, (0.0,), 1.0, None),
                Node(1, 2, (1.0,), 0.5, 0),
                Node(2, 2, (-1.0,), 0.4, 0),
            ),
        )
        violations = tree_service.validate(tree)
        assert len(violations) == 1
        assert "children probabilities sum ≠ 1" in violations[0]
        assert "node 0" in violations[0]

    def test_gap_trees_are_valid(self, gap_trees):
        for tree in gap_trees:
            assert tree_service.validate(tree) == []

    def test_reports_structural_violations(self):
        tree = ScenarioTree(
            depth=3,
            value_dim=1,
            nodes=(
                Node(0, 1, (0.0,), 1.0, None),
                Node(1, 2, (1.0, 2.0), 1.0, 0),
                Node(2, 3, (math.nan,), 1.0, 7),
            ),
        )
        violations = " | ".join(tree_service.validate(tree))
        assert "node 1: value has length 2" in violations
        assert "node 2: value is not finite" in violations
        assert "node 2: parent 7 does not exist" in violations
        assert "node 1: leaf at stage 2" in violations

    def test_two_roots(self):
        tree = ScenarioTree(
            depth=1,
            value_dim=1,
            nodes=(Node(0, 1, (0.0,), 1.0, None), Node(1, 1, (0.0,), 1.0, None)),
        )
        assert any("exactly one root" in v for v in tree_service.validate(tree))

    def test_duplicate_ids_reported_once(self):
        tree = ScenarioTree(
            depth=2,
            value_dim=1,
            nodes=(
                Node(0, 1, (0.0,), 1.0, None),
                Node(1, 2, (1.0,), 0.5, 0),
                Node(1, 2, (2.0,), 0.5, 0),
            ),
        )
        assert tree_service.validate(tree) == ["node 1: duplicate id"]

    def test_zero_probability_child(self):
        tree = ScenarioTree(
            depth=2,
            value_dim=1,
            nodes=(
                Node(0, 1, (0.0,), 1.0, None),
                Node(1, 2, (1.0,), 1.0, 0),
                Node(2, 2, (2.0,), 0.0, 0),
            ),
        )
        assert any("node 2: cond_prob" in v for v in tree_service.validate(tree))


class TestPathLaw:
    def test_informed_tree(self, gap_trees):
        law = tree_service.path_law(gap_trees[0])
        paths = sorted(law.as_dict().items())
        assert len(paths) == 2
        (low, p_low), (high, p_high) = paths
        assert low == pytest.approx((1.0, 0.9, 0.0))
        assert high == pytest.approx((1.0, 1.1, 2.0))
        assert p_low == pytest.approx(0.5)
        assert p_high == pytest.approx(0.5)

    def test_uninformed_tree(self, gap_trees):
        law = tree_service.path_law(gap_trees[1])
        assert law.as_dict() == {(1.0, 1.0, 2.0): 0.5, (1.0, 1.0, 0.0): 0.5}

    def test_chain_tree_has_one_certain_path(self):
        law = tree_service.path_law(chain_tree([0.0, 1.0, 3.0]))
        assert len(law) == 1
        assert law.probabilities.tolist() == [1.0]
        assert law.values.tolist() == [[0.0, 1.0, 3.0]]

    def test_probabilities_sum_to_one(self, make_tree):
        for seed in range(20):
            law = tree_service.path_law(make_tree(depth=5, seed=seed))
            assert abs(law.probabilities.sum() - 1.0) <= 1e-12
            assert np.all(law.probabilities > 0)

    def test_leaf_order(self, make_tree):
        tree = make_tree(depth=4, seed=3)
        law = tree_service.path_law(tree)
        assert law.leaf_ids == tree.leaves
        assert list(law.leaf_ids) == sorted(law.leaf_ids)

    def test_invalid_tree_rejected(self):
        tree = ScenarioTree(depth=2, value_dim=1, nodes=(Node(0, 1, (0.0,), 1.0, None),))
        with pytest.raises(TreeValidationException):
            tree_service.path_law(tree)


class TestChildrenDistribution:
    def test_root_of_informed_tree(self, gap_trees):
        law = tree_service.children_distribution(gap_trees[0], 0)
        assert law.support == (1, 2)
        assert law.as_dict() == {1: 0.5, 2: 0.5}

    def test_single_child(self, gap_trees):
        assert tree_service.children_distribution(gap_trees[0], 1).as_dict() == {3: 1.0}

    def test_leaf_has_no_children(self, gap_trees):
        with pytest.raises(NoChildrenException, match="no children"):
            tree_service.children_distribution(gap_trees[0], 3)

    def test_unknown_node(self, gap_trees):
        with pytest.raises(NodeNotFoundException):
            tree_service.children_distribution(gap_trees[0], 99)

    def test_generated_weights_sum_to_one(self, make_tree):
        tree = make_tree(depth=5, seed=11)
        for node in tree.nodes:
            if not tree.is_leaf(node.id):
                weights = tree_service.children_distribution(tree, node.id).weights
                assert abs(weights.sum() - 1.0) <= 1e-12


class TestGenerate:
    @pytest.mark.parametrize("seed", [0, 7, 2**63])
    def test_depth_one_is_a_single_node(self, seed):
        tree = tree_service.generate(GenSpec(depth=1, max_children=3, seed=seed, root_scale=0.0))
        assert tree.size == 1
        assert tree.root.value == (0.0,)

    def test_root_value_is_gaussian(self):
        tree = tree_service.generate(GenSpec(depth=1, value_dim=2, seed=3, root_scale=2.5))
        expected = 2.5 * np.random.default_rng(3).standard_normal(2)
        np.testing.assert_array_equal(tree.root.value, expected)

    def test_root_draw_comes_first(self):
        deep = tree_service.generate(GenSpec(depth=4, seed=11))
        flat = tree_service.generate(GenSpec(depth=1, seed=11))
        assert deep.root.value == flat.root.value

    def test_deterministic(self):
        spec = GenSpec(depth=4, max_children=3, seed=42)
        first = tree_service.serialize_tree(tree_service.generate(spec))
        second = tree_service.serialize_tree(tree_service.generate(spec))
        assert first == second

    def test_seeds_differ(self):
        a = tree_service.generate(GenSpec(depth=4, seed=1))
        b = tree_service.generate(GenSpec(depth=4, seed=2))
        assert a != b

    def test_generated_trees_are_valid(self, make_tree):
        for seed in range(100):
            tree = make_tree(depth=6, seed=seed)
            assert tree_service.validate(tree) == []
            for node in tree.nodes:
                count = len(tree.children(node.id))
                if node.stage < 6:
                    assert 1 <= count <= 3
                else:
                    assert count == 0

    def test_breadth_first_ids(self, make_tree):
        tree = make_tree(depth=4, seed=5)
        stages = [node.stage for node in tree.nodes]
        assert stages == sorted(stages)
        assert [node.id for node in tree.nodes] == list(range(tree.size))

    def test_value_dimension(self):
        tree = tree_service.generate(GenSpec(depth=3, value_dim=2, seed=9))
        assert all(len(node.value) == 2 for node in tree.nodes)
        assert tree_service.validate(tree) == []


class TestSerialization:
    def test_round_trip_single_node(self, single_node_tree):
        text = tree_service.serialize_tree(single_node_tree)
        assert json.loads(text) == {
            "depth": 1,
            "value_dim": 1,
            "nodes": [{"id": 0, "stage": 1, "parent": None, "value": [0.0], "cond_prob": 1.0}],
        }
        assert tree_service.parse_tree(text) == single_node_tree

    def test_round_trip_generated(self, make_tree):
        for seed in range(20):
            tree = make_tree(depth=4, seed=seed, value_dim=2)
            assert tree_service.parse_tree(tree_service.serialize_tree(tree)) == tree

    def test_round_trip_keeps_path_law(self, gap_trees):
        tree = gap_trees[0]
        parsed = tree_service.parse_tree(tree_service.serialize_tree(tree))
        assert tree_service.path_law(parsed).as_dict() == tree_service.path_law(tree).as_dict()

    def test_canonical_node_order(self):
        shuffled = ScenarioTree(
            depth=2,
            value_dim=1,
            nodes=(
                Node(2, 2, (1.0,), 0.5, 0),
                Node(0, 1, (0.0,), 1.0, None),
                Node(1, 2, (-1.0,), 0.5, 0),
            ),
        )
        ids = [node["id"] for node in json.loads(tree_service.serialize_tree(shuffled))["nodes"]]
        assert ids == [0, 1, 2]

    def test_missing_field_names_it(self):
        document = {
            "depth": 1,
            "value_dim": 1,
            "nodes": [{"id": 0, "stage": 1, "parent": None, "value": [0.0]}],
        }
        with pytest.raises(TreeSchemaException) as info:
            tree_service.parse_tree(json.dumps(document))
        assert "cond_prob" in str(info.value)
        assert info.value.error_code == "SCHEMA_ERROR"

    def test_malformed_json(self):
        with pytest.raises(TreeParseException) as info:
            tree_service.parse_tree(b"{not json", source="broken.json")
        assert "broken.json" in str(info.value)
        assert info.value.error_code == "MALFORMED_JSON"

    def test_invariant_violation(self):
        document = {
            "depth": 2,
            "value_dim": 1,
            "nodes": [
                {"id": 0, "stage": 1, "parent": None, "value": [0.0], "cond_prob": 1.0},
                {"id": 1, "stage": 2, "parent": 0, "value": [1.0], "cond_prob": 0.7},
            ],
        }
        with pytest.raises(TreeValidationException) as info:
            tree_service.parse_tree(json.dumps(document))
        assert info.value.error_code == "INVALID_TREE"
        assert any("node 0" in v for v in info.value.violations)


class TestHelpers:
    def test_scale_tree(self, gap_trees):
        scaled = tree_service.scale_tree(gap_trees[0], 3.0)
        assert [node.value for node in scaled.nodes] == [
            (3.0 * x,) for node in gap_trees[0].nodes for x in node.value
        ]
        with pytest.raises(ValueError):
            tree_service.scale_tree(gap_trees[0], 0.0)

    def test_summary(self, gap_trees):
        summary = tree_service.tree_summary(gap_trees[0])
        assert summary == {
            "depth": 3,
            "value_dim": 1,
            "nodes": 5,
            "leaves": 2,
            "stage_sizes": [1, 2, 2],
            "max_children": 2,
        }

    def test_ancestry_and_path_values(self, gap_trees):
        tree = gap_trees[0]
        assert tree.ancestry(4) == (0, 2, 4)
        assert tree.path_values(4) == pytest.approx([1.0, 0.9, 0.0])
