"""Tests for the entropic solver"""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.distance import cdist
from scipy.special import entr

from nestedot.core.exceptions import ConvergenceException, NumericalInstabilityException
from nestedot.schemas.solver import SinkhornConfig
from nestedot.services.entropic_ot import (
    entropy,
    gamma_heuristic,
    gibbs_kernel,
    reg_ot,
    round_to_feasible,
    sinkhorn,
    sinkhorn_batch,
    solve_regularized,
)
from nestedot.services.exact_ot import solve_exact
from tests.conftest import random_law

SWAP_COST = np.array([[0.0, 1.0], [1.0, 0.0]])

# Monotone coupling of the weights below; every basic cell carries at least 0.05
STAIRCASE_PLAN = np.array(
    [
        [0.10, 0.00, 0.00, 0.00, 0.00],
        [0.15, 0.15, 0.00, 0.00, 0.00],
        [0.00, 0.05, 0.15, 0.00, 0.00],
        [0.00, 0.00, 0.10, 0.10, 0.05],
        [0.00, 0.00, 0.00, 0.00, 0.15],
    ]
)


def unbalanced_instance():
    return np.array([0.7, 0.3]), np.array([0.4, 0.6]), SWAP_COST


def staircase_instance(seed: int = 5):
    """Sorted jittered points on a line with squared distance cost"""
    rng = np.random.default_rng(seed)
    red = np.arange(5.0) + 0.5 * rng.random(5)
    blue = np.arange(5.0) + 0.25 + 0.5 * rng.random(5)
    p = np.array([0.10, 0.30, 0.20, 0.25, 0.15])
    q = np.array([0.25, 0.20, 0.25, 0.10, 0.20])
    return p, q, cdist(red[:, None], blue[:, None], metric="sqeuclidean")


class TestHelpers:
    def test_entropy(self):
        assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
        assert entropy([1.0]) == 0.0
        assert entropy([0.25] * 4) == pytest.approx(math.log(4))

    def test_gibbs_kernel(self):
        kernel = gibbs_kernel([[0.0, 1.0]], 0.5)
        np.testing.assert_allclose(kernel, [[1.0, math.exp(-2.0)]])
        with pytest.raises(ValueError):
            gibbs_kernel([[0.0, 1.0]], 0.0)

    def test_gamma_heuristic(self):
        cost = np.array([[0.0, 3.0], [1.0, 2.0]])
        assert gamma_heuristic(cost) == pytest.approx(0.1)
        assert gamma_heuristic(cost, divisor=3) == pytest.approx(1.0)
        assert gamma_heuristic(np.zeros((2, 3))) is None
        with pytest.raises(ValueError):
            gamma_heuristic(cost, divisor=0)

    def test_config_rejects_nonpositive_gamma(self):
        with pytest.raises(ValidationError):
            SinkhornConfig(gamma=0.0)


class TestSinkhorn:
    def test_two_by_two_closed_form(self):
        result = sinkhorn([0.5, 0.5], [0.5, 0.5], SWAP_COST, SinkhornConfig(gamma=1.0, tol=1e-13))
        diagonal = 0.5 / (1.0 + math.exp(-1.0))
        np.testing.assert_allclose(
            result.plan.entries,
            [[diagonal, 0.5 - diagonal], [0.5 - diagonal, diagonal]],
            atol=1e-12,
        )
        assert result.reg_cost == pytest.approx(1.0 / (1.0 + math.e), abs=1e-12)
        assert result.reg_cost == pytest.approx(0.26894, abs=1e-5)
        assert result.converged and not result.rounded

    @pytest.mark.parametrize("log_domain", [True, False])
    def test_plan_factorizes(self, log_domain, rng):
        p, q, cost = random_law(rng, 4), random_law(rng, 3), rng.random((4, 3))
        result = sinkhorn(p, q, cost, SinkhornConfig(gamma=0.5, log_domain=log_domain))
        expected = result.u[:, None] * gibbs_kernel(cost, 0.5) * result.v[None, :]
        np.testing.assert_allclose(result.plan.entries, expected, rtol=1e-12)
        np.testing.assert_allclose(result.log_u, np.log(result.u), rtol=1e-12, atol=1e-12)

    def test_constant_cost_gives_product_plan(self, rng):
        p, q = random_law(rng, 3), random_law(rng, 4)
        result = sinkhorn(p, q, np.full((3, 4), 2.0), SinkhornConfig(gamma=0.7))
        np.testing.assert_allclose(result.plan.entries, np.outer(p, q), atol=1e-12)

    def test_random_contract(self, rng):
        for _ in range(120):
            n, m = rng.integers(1, 11, size=2)
            p, q, cost = random_law(rng, n), random_law(rng, m), rng.random((n, m))
            gamma = gamma_heuristic(cost, divisor=30)
            result = sinkhorn(p, q, cost, SinkhornConfig(gamma=gamma, tol=1e-9, max_iter=100000))
            assert result.converged
            assert result.marginal_err <= 1e-9
            assert np.all(result.plan.entries >= 0)
            factored = result.u[:, None] * gibbs_kernel(cost, gamma) * result.v[None, :]
            np.testing.assert_allclose(result.plan.entries, factored, rtol=1e-12)
            exact, _ = solve_exact(p, q, cost)
            assert result.reg_cost >= exact - 1e-12
            plan_entropy = float(np.sum(entr(result.plan.entries)))
            assert result.objective == pytest.approx(result.reg_cost - gamma * plan_entropy, abs=1e-12)

    def test_dominance_at_small_gamma(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            p, q, cost = random_law(rng, 5), random_law(rng, 5), rng.random((5, 5))
            exact, _ = solve_exact(p, q, cost)
            outcome = solve_regularized(p, q, cost, gamma_divisor=1000, on_max_iter="round")
            assert outcome.value >= exact - 1e-12

    def test_plain_matches_log_domain(self, rng):
        for _ in range(10):
            p, q, cost = random_law(rng, 4), random_law(rng, 5), rng.random((4, 5))
            log_run = sinkhorn(p, q, cost, SinkhornConfig(gamma=0.3, tol=1e-12))
            plain_run = sinkhorn(p, q, cost, SinkhornConfig(gamma=0.3, tol=1e-12, log_domain=False))
            np.testing.assert_allclose(log_run.plan.entries, plain_run.plan.entries, atol=1e-8)

    def test_small_gamma_approaches_exact(self):
        p, q, cost = staircase_instance()
        exact, plan = solve_exact(p, q, cost)
        np.testing.assert_allclose(plan.entries, STAIRCASE_PLAN, atol=1e-12)

        outcome = solve_regularized(p, q, cost, gamma_divisor=1000)
        assert outcome.gamma == pytest.approx(cost.max() / 1000.0)
        assert outcome.result.converged
        assert outcome.result.iterations <= 10000
        assert abs(outcome.value - exact) <= 1e-3 * cost.max()
        assert outcome.value >= exact - 1e-12
        assert reg_ot(p, q, cost, gamma_divisor=1000) == outcome.value

        # exp(-max(c) / gamma) = exp(-1000) is zero in float64
        with pytest.raises(NumericalInstabilityException):
            solve_regularized(p, q, cost, gamma_divisor=1000, log_domain=False)


class TestMaxIter:
    def test_raises_with_iteration_count(self):
        p, q, cost = unbalanced_instance()
        with pytest.raises(ConvergenceException) as info:
            sinkhorn(p, q, cost, SinkhornConfig(gamma=0.1, max_iter=1))
        assert info.value.iterations == 1
        assert info.value.marginal_err > 1e-9
        assert info.value.error_code == "NOT_CONVERGED"

    def test_unreachable_tolerance(self):
        p, q, cost = unbalanced_instance()
        with pytest.raises(ConvergenceException):
            sinkhorn(p, q, cost, SinkhornConfig(gamma=0.1, tol=1e-15, max_iter=3))

    def test_round_returns_feasible_plan(self):
        p, q, cost = unbalanced_instance()
        result = sinkhorn(p, q, cost, SinkhornConfig(gamma=0.1, max_iter=1, on_max_iter="round"))
        assert result.rounded
        assert not result.converged
        assert result.marginal_err <= 1e-12
        assert np.all(result.plan.entries >= 0)


class TestRoundToFeasible:
    def test_marginals_are_restored(self, rng):
        for _ in range(20):
            n, m = rng.integers(1, 6, size=2)
            p, q = random_law(rng, n), random_law(rng, m)
            rough = rng.random((n, m))
            rounded = round_to_feasible(rough, p, q)
            assert np.all(rounded >= 0)
            np.testing.assert_allclose(rounded.sum(axis=1), p, atol=1e-12)
            np.testing.assert_allclose(rounded.sum(axis=0), q, atol=1e-12)

    def test_feasible_plan_is_kept(self, rng):
        p, q = random_law(rng, 3), random_law(rng, 4)
        plan = np.outer(p, q)
        np.testing.assert_allclose(round_to_feasible(plan, p, q), plan, atol=1e-15)


class TestSolveRegularized:
    def test_zero_cost_is_degenerate(self, rng):
        p, q = random_law(rng, 3), random_law(rng, 2)
        outcome = solve_regularized(p, q, np.zeros((3, 2)))
        assert outcome.degenerate
        assert outcome.value == 0.0
        assert outcome.result is None
        np.testing.assert_allclose(outcome.plan.entries, np.outer(p, q))

    def test_gamma_follows_divisor(self):
        p, q, _ = unbalanced_instance()
        outcome = solve_regularized(p, q, 3.0 * SWAP_COST)
        assert outcome.gamma == pytest.approx(0.1)
        assert outcome.result.gamma == outcome.gamma
        assert outcome.value == pytest.approx(outcome.result.reg_cost)
        assert not outcome.rounded

    def test_reg_ot(self):
        p, q, cost = unbalanced_instance()
        assert reg_ot(p, q, cost, gamma_divisor=10) == pytest.approx(
            solve_regularized(p, q, cost, gamma_divisor=10).value
        )


class TestScaling:
    @pytest.mark.parametrize("factor", [0.5, 3.0])
    def test_joint_scaling_keeps_plan(self, rng, factor):
        for _ in range(20):
            n, m = rng.integers(2, 8, size=2)
            p, q, cost = random_law(rng, n), random_law(rng, m), rng.random((n, m))
            base = solve_regularized(p, q, cost, tol=1e-12, max_iter=100000)
            scaled = solve_regularized(p, q, factor * cost, tol=1e-12, max_iter=100000)
            assert scaled.gamma == pytest.approx(factor * base.gamma, rel=1e-14)
            np.testing.assert_allclose(scaled.plan.entries, base.plan.entries, rtol=0, atol=1e-10)
            assert scaled.value == pytest.approx(factor * base.value, rel=1e-9)


class TestBatch:
    def test_matches_solo_runs(self, rng):
        problems = []
        for n, m in [(1, 3), (4, 2), (3, 3), (2, 5)]:
            cost = rng.random((n, m))
            problems.append((random_law(rng, n), random_law(rng, m), cost, float(cost.max()) / 30.0))

        results = sinkhorn_batch(problems, tol=1e-11, max_iter=50000)
        for (p, q, cost, gamma), batched in zip(problems, results):
            solo = sinkhorn(p, q, cost, SinkhornConfig(gamma=gamma, tol=1e-11, max_iter=50000))
            assert abs(batched.iterations - solo.iterations) <= 1
            assert batched.plan.shape == cost.shape
            np.testing.assert_allclose(batched.plan.entries, solo.plan.entries, rtol=1e-10, atol=1e-14)

    def test_empty_batch(self):
        assert sinkhorn_batch([]) == []

    def test_failure_reports_index(self, rng):
        p, q, cost = unbalanced_instance()
        easy = (random_law(rng, 2), random_law(rng, 3), np.ones((2, 3)), 1.0)
        with pytest.raises(ConvergenceException) as info:
            sinkhorn_batch([easy, (p, q, cost, 0.1)], max_iter=1)
        assert info.value.index == 1
