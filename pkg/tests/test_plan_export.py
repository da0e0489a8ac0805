"""Tests for plan export and threshold edges"""

import math

import numpy as np
import pytest

from nestedot.core.exceptions import CsvSchemaException, StructureMismatchException
from nestedot.services import plan_export

SPACING = math.sqrt(0.005)


@pytest.fixture
def two_point_cloud(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text(f"x0\n0.0\n{SPACING!r}\n")
    return path


def edge_count(edge_rows, gamma, theta):
    return sum(1 for row in edge_rows if row["gamma"] == gamma and row["threshold"] == theta)


class TestPointClouds:
    def test_uniform_weights(self, two_point_cloud):
        points, weights = plan_export.load_point_cloud(two_point_cloud)
        assert points.shape == (2, 1)
        assert weights.tolist() == [0.5, 0.5]

    def test_weight_column_is_normalized(self, tmp_path):
        path = tmp_path / "weighted.csv"
        path.write_text("x0,x1,weight\n0,0,1\n1,0,3\n")
        points, weights = plan_export.load_point_cloud(path)
        assert points.tolist() == [[0.0, 0.0], [1.0, 0.0]]
        np.testing.assert_allclose(weights, [0.25, 0.75])

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x2\n0,0\n")
        with pytest.raises(CsvSchemaException) as info:
            plan_export.load_point_cloud(path)
        assert info.value.error_code == "CSV_SCHEMA"

    def test_point_cost(self):
        cost = plan_export.point_cost(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]), r=2)
        assert cost[0, 0] == pytest.approx(25.0)
        with pytest.raises(StructureMismatchException):
            plan_export.point_cost(np.zeros((1, 2)), np.zeros((1, 3)))


class TestThresholds:
    def test_threshold_edges(self):
        plan = np.array([[0.4, 0.1], [0.2, 0.3]])
        p = np.array([0.5, 0.5])
        assert plan_export.threshold_edges(plan, p, 0.3) == [(0, 0), (1, 0), (1, 1)]
        assert plan_export.threshold_edges(plan, p, 0.5) == [(0, 0), (1, 1)]

    def test_plans_sharpen_as_gamma_shrinks(self, two_point_cloud):
        xs, p = plan_export.load_point_cloud(two_point_cloud)
        cost = plan_export.point_cost(xs, xs, r=2)
        assert cost[0, 1] == pytest.approx(0.005)

        gammas = [0.008, 0.005, 0.003]
        plan_rows, edge_rows = plan_export.export_plans(p, p, cost, gammas, tol=1e-12)

        assert len(plan_rows) == 3 * 4
        assert [edge_count(edge_rows, gamma, 0.3) for gamma in gammas] == [4, 2, 2]
        assert [edge_count(edge_rows, gamma, 0.2) for gamma in gammas] == [4, 4, 2]

        # off-diagonal share of each row is 1 / (1 + exp(c / gamma))
        for row in plan_rows:
            if row["source"] != row["target"]:
                share = 1.0 / (1.0 + math.exp(0.005 / row["gamma"]))
                assert row["mass"] == pytest.approx(0.5 * share, abs=1e-10)

    def test_huge_gamma_gives_product_plan(self, two_point_cloud):
        xs, p = plan_export.load_point_cloud(two_point_cloud)
        cost = plan_export.point_cost(xs, xs)
        plan_rows, edge_rows = plan_export.export_plans(p, p, cost, [1e9], thresholds=[0.3])
        for row in plan_rows:
            assert row["mass"] == pytest.approx(0.25, abs=1e-10)
        assert edge_count(edge_rows, 1e9, 0.3) == 4
        assert all(row["share"] == pytest.approx(0.5) for row in edge_rows)


class TestTreeProblem:
    def test_leaf_labels(self, gap_trees):
        p, q, cost, sources, targets = plan_export.tree_problem(*gap_trees, r=1)
        assert sources == (3, 4)
        assert targets == (2, 3)
        np.testing.assert_allclose(cost, [[0.1, 2.1], [2.1, 0.1]], atol=1e-12)
        np.testing.assert_allclose(p, [0.5, 0.5])

    def test_rows_use_leaf_ids(self, gap_trees):
        p, q, cost, sources, targets = plan_export.tree_problem(*gap_trees, r=2)
        plan_rows, _ = plan_export.export_plans(
            p, q, cost, [0.05], sources=sources, targets=targets
        )
        assert {(row["source"], row["target"]) for row in plan_rows} == {
            (3, 2),
            (3, 3),
            (4, 2),
            (4, 3),
        }
        assert sum(row["mass"] for row in plan_rows) == pytest.approx(1.0, abs=1e-9)
