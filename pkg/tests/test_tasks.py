"""Task objectives and gradients against independent oracles.

Oracles: explicit covariance for the mean-variance quadratic, central
finite differences for every analytic gradient, Monte-Carlo averages for
the newsvendor closed form, the naive log-likelihood formula and an
explicit Hessian for the logistic operations.
"""

import math

import numpy as np
import pytest

from sobench.backend import make_backend
from sobench.errors import DimensionMismatch, InsufficientSamples
from sobench.sampling import ClassificationData, GaussianSpec, RngStream, sample_returns, synth_classification
from sobench.tasks import (
    LogisticTask,
    NewsvendorTask,
    build_sample_set,
    logistic_gradient,
    logistic_hvp,
    logistic_loss,
    mv_gradient,
    mv_objective,
    nv_gradient_exact,
    nv_gradient_hat,
    nv_objective_exact,
)

SEQ = make_backend("sequential")
PAR = make_backend("parallel")


def central_diff(f, x, step=1e-6):
    g = np.empty(x.size)
    for j in range(x.size):
        h = step * (1.0 + abs(x[j]))
        up = x.copy()
        dn = x.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (f(up) - f(dn)) / (2 * h)
    return g


def make_sample_set(d=10, n=50, seed=0):
    rng = np.random.default_rng(seed)
    spec = GaussianSpec(mean=rng.uniform(-1, 1, d), diag_std=rng.uniform(0.5, 2.0, d))
    draws = sample_returns(spec, n, RngStream(seed, 0))
    return build_sample_set(draws, SEQ)


class TestMeanVariance:
    def test_zero_weights_zero_objective(self):
        ss = make_sample_set()
        assert mv_objective(np.zeros(10), ss, SEQ) == 0.0

    def test_two_sample_hand_case(self):
        ss = build_sample_set(np.array([[0.0], [2.0]]), SEQ)
        # mean 1, centered (-1, 1): 0.5 * (1/1) * 2 - 1 = 0
        assert mv_objective(np.array([1.0]), ss, SEQ) == pytest.approx(0.0, abs=1e-15)

    def test_matches_dense_covariance_oracle(self):
        ss = make_sample_set(d=20, n=50, seed=1)
        rng = np.random.default_rng(2)
        cov = ss.centered.T @ ss.centered / (ss.count - 1)
        for _ in range(20):
            w = rng.standard_normal(20)
            expected = 0.5 * w @ cov @ w - w @ ss.mean
            assert mv_objective(w, ss, SEQ) == pytest.approx(expected, abs=1e-10, rel=1e-10)

    def test_gradient_at_zero_is_minus_mean(self):
        ss = make_sample_set(seed=3)
        np.testing.assert_allclose(mv_gradient(np.zeros(10), ss, SEQ), -ss.mean, atol=1e-15)

    def test_gradient_matches_finite_differences(self):
        ss = make_sample_set(seed=4)
        rng = np.random.default_rng(5)
        w = rng.standard_normal(10)
        g = mv_gradient(w, ss, SEQ)
        fd = central_diff(lambda v: mv_objective(v, ss, SEQ), w)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8)

    def test_quadratic_part_linear_in_w(self):
        ss = make_sample_set(seed=6)
        rng = np.random.default_rng(7)
        w = rng.standard_normal(10)
        for alpha in (0.25, 2.0, -3.0):
            lhs = mv_gradient(alpha * w, ss, SEQ) + ss.mean
            rhs = alpha * (mv_gradient(w, ss, SEQ) + ss.mean)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_sample_set_invariants(self):
        ss = make_sample_set(d=8, n=40, seed=8)
        np.testing.assert_allclose(ss.centered.sum(axis=0), 0.0, atol=1e-9 * ss.count)
        np.testing.assert_allclose(ss.mean, ss.samples.mean(axis=0), rtol=1e-13)

    def test_backend_bit_equality(self):
        ss = make_sample_set(d=64, n=30, seed=9)
        w = np.random.default_rng(10).standard_normal(64)
        assert mv_objective(w, ss, SEQ) == mv_objective(w, ss, PAR)
        np.testing.assert_array_equal(mv_gradient(w, ss, SEQ), mv_gradient(w, ss, PAR))

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamples):
            build_sample_set(np.ones((1, 3)), SEQ)


def make_newsvendor(n=5, seed=0):
    rng = np.random.default_rng(seed)
    return NewsvendorTask(
        unit_cost=rng.uniform(1, 2, n),
        holding_cost=rng.uniform(0.5, 1, n),
        selling_value=rng.uniform(3, 5, n),
        demand_mean=rng.uniform(20, 50, n),
        demand_std=rng.uniform(10, 20, n),
        budget_costs=np.ones(n),
        budget=100.0,
    )


class TestNewsvendor:
    def test_hat_below_all_samples(self):
        task = make_newsvendor(3)
        demands = np.sort(np.random.default_rng(1).uniform(10, 90, (3, 8)), axis=1)
        g = nv_gradient_hat(np.zeros(3), demands, task, SEQ)
        np.testing.assert_allclose(g, task.unit_cost - task.selling_value, atol=1e-15)

    def test_hat_above_all_samples(self):
        task = make_newsvendor(3)
        demands = np.sort(np.random.default_rng(2).uniform(10, 90, (3, 8)), axis=1)
        g = nv_gradient_hat(np.full(3, 1e6), demands, task, SEQ)
        np.testing.assert_allclose(g, task.unit_cost + task.holding_cost, atol=1e-15)

    def test_hat_hand_count(self):
        task = NewsvendorTask(
            unit_cost=np.array([1.0]), holding_cost=np.array([0.5]),
            selling_value=np.array([2.0]), demand_mean=np.array([2.5]),
            demand_std=np.array([1.0]), budget_costs=np.array([1.0]), budget=10.0,
        )
        demands = np.array([[1.0, 2.0, 3.0, 4.0]])
        g = nv_gradient_hat(np.array([2.0]), demands, task, SEQ)
        # 1 - 2 + 2.5 * (2/4)
        np.testing.assert_allclose(g, [0.25], atol=1e-15)

    def test_hat_monotone_in_stock(self):
        task = make_newsvendor(4, seed=3)
        demands = np.sort(np.random.default_rng(4).normal(35, 15, (4, 100)), axis=1)
        xs = np.linspace(0, 80, 30)
        prev = None
        for x in xs:
            g = nv_gradient_hat(np.full(4, x), demands, task, SEQ)
            if prev is not None:
                assert np.all(g >= prev - 1e-12)
            prev = g

    def test_hat_empty_samples(self):
        task = make_newsvendor(2)
        with pytest.raises(InsufficientSamples):
            nv_gradient_hat(np.zeros(2), np.empty((2, 0)), task, SEQ)

    def test_exact_at_mean(self):
        task = make_newsvendor(6, seed=5)
        g = nv_gradient_exact(task.demand_mean, task, SEQ)
        expected = task.unit_cost - task.selling_value \
            + (task.holding_cost + task.selling_value) / 2
        np.testing.assert_allclose(g, expected, atol=1e-12)

    def test_exact_far_below(self):
        task = make_newsvendor(3, seed=6)
        g = nv_gradient_exact(task.demand_mean - 12 * task.demand_std, task, SEQ)
        np.testing.assert_allclose(g, task.unit_cost - task.selling_value, atol=1e-12)

    def test_objective_at_mean_symmetry(self):
        task = make_newsvendor(4, seed=7)
        f = nv_objective_exact(task.demand_mean, task, SEQ)
        phi0 = 1.0 / math.sqrt(2 * math.pi)
        expected = np.sum(
            task.unit_cost * task.demand_mean
            + (task.holding_cost + task.selling_value) * task.demand_std * phi0
        )
        assert f == pytest.approx(expected, rel=1e-12)

    def test_objective_matches_monte_carlo(self):
        task = make_newsvendor(3, seed=8)
        rng = np.random.default_rng(9)
        x = task.demand_mean * rng.uniform(0.5, 1.5, 3)
        xi = task.demand_mean + task.demand_std * rng.standard_normal((1_000_000, 3))
        cost = (
            task.unit_cost * x
            + task.holding_cost * np.maximum(x - xi, 0)
            + task.selling_value * np.maximum(xi - x, 0)
        ).sum(axis=1)
        assert nv_objective_exact(x, task, SEQ) == pytest.approx(cost.mean(), rel=0.005)

    def test_exact_gradient_matches_finite_differences(self):
        task = make_newsvendor(5, seed=10)
        x = task.demand_mean * 0.8
        g = nv_gradient_exact(x, task, SEQ)
        fd = central_diff(lambda v: nv_objective_exact(v, task, SEQ), x)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)

    def test_hat_approaches_exact(self):
        task = make_newsvendor(4, seed=11)
        from sobench.sampling import sample_demands

        demands = sample_demands(task.demand_mean, task.demand_std, 200_000, RngStream(1, 1))
        x = task.demand_mean.copy()
        hat = nv_gradient_hat(x, demands, task, SEQ)
        exact = nv_gradient_exact(x, task, SEQ)
        tol = 0.01 * (task.holding_cost + task.selling_value)
        assert np.all(np.abs(hat - exact) <= tol)

    def test_backend_bit_equality(self):
        task = make_newsvendor(64, seed=12)
        demands = np.sort(
            np.random.default_rng(13).normal(35, 15, (64, 25)), axis=1
        )
        x = np.abs(np.random.default_rng(14).normal(30, 10, 64))
        np.testing.assert_array_equal(
            nv_gradient_hat(x, demands, task, SEQ), nv_gradient_hat(x, demands, task, PAR)
        )
        assert nv_objective_exact(x, task, SEQ) == nv_objective_exact(x, task, PAR)
        np.testing.assert_array_equal(
            nv_gradient_exact(x, task, SEQ), nv_gradient_exact(x, task, PAR)
        )


def make_logistic(n=10, seed=0):
    return LogisticTask(data=synth_classification(n, RngStream(seed, 0)))


class TestLogistic:
    def test_zero_weights_log2(self):
        task = make_logistic()
        loss = logistic_loss(np.zeros(10), task.data, None, SEQ)
        assert loss == pytest.approx(math.log(2), rel=1e-12)

    def test_saturated_sample_loss_vanishes(self):
        data = ClassificationData(
            features=np.array([[1.0, 1.0]]), labels=np.array([1.0]),
            true_weights=np.zeros(2),
        )
        loss = logistic_loss(np.array([500.0, 500.0]), data, None, SEQ)
        assert 0.0 <= loss < 1e-12

    def test_matches_naive_formula(self):
        task = make_logistic(6, seed=1)
        rng = np.random.default_rng(2)
        x = task.data.features
        z = task.data.labels
        for _ in range(20):
            w = rng.uniform(-1, 1, 6)
            t = x @ w
            if np.max(np.abs(t)) > 10:
                continue
            c = 1 / (1 + np.exp(-t))
            naive = float(np.mean(-(z * np.log(c) + (1 - z) * np.log(1 - c))))
            assert logistic_loss(w, task.data, None, SEQ) == pytest.approx(naive, abs=1e-12)

    def test_gradient_at_zero(self):
        task = make_logistic(8, seed=3)
        g = logistic_gradient(np.zeros(8), task.data, None, SEQ)
        expected = ((0.5 - task.data.labels) @ task.data.features) / task.data.n_samples
        np.testing.assert_allclose(g, expected, atol=1e-13)

    def test_gradient_matches_finite_differences(self):
        task = make_logistic(10, seed=4)
        idx = np.arange(30)
        rng = np.random.default_rng(5)
        w = rng.uniform(-0.5, 0.5, 10)
        g = logistic_gradient(w, task.data, idx, SEQ)
        fd = central_diff(lambda v: logistic_loss(v, task.data, idx, SEQ), w)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8)

    def test_gradient_vanishes_on_separable_ray(self):
        features = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
        labels = np.array([1.0, 0.0, 1.0, 0.0])
        data = ClassificationData(features=features, labels=labels, true_weights=np.zeros(2))
        direction = np.array([2.0, -1.0])  # strictly separates all four points
        norms = [np.linalg.norm(logistic_gradient(scale * direction, data, None, SEQ))
                 for scale in (1.0, 10.0, 100.0)]
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] < 1e-10

    def test_hvp_zero_vector(self):
        task = make_logistic(5, seed=6)
        out = logistic_hvp(np.ones(5), np.zeros(5), task.data, None, SEQ)
        np.testing.assert_array_equal(out, np.zeros(5))

    def test_hvp_matches_explicit_hessian(self):
        task = make_logistic(5, seed=7)
        rng = np.random.default_rng(8)
        w = rng.uniform(-1, 1, 5)
        x = task.data.features
        t = x @ w
        c = 1 / (1 + np.exp(-t))
        hess = (x.T * (c * (1 - c))) @ x / task.data.n_samples
        for _ in range(10):
            v = rng.standard_normal(5)
            np.testing.assert_allclose(
                logistic_hvp(w, v, task.data, None, SEQ), hess @ v, rtol=1e-10, atol=1e-12
            )

    def test_hvp_symmetric_bilinear(self):
        task = make_logistic(7, seed=9)
        rng = np.random.default_rng(10)
        w = rng.uniform(-1, 1, 7)
        for _ in range(10):
            u = rng.standard_normal(7)
            v = rng.standard_normal(7)
            lhs = u @ logistic_hvp(w, v, task.data, None, SEQ)
            rhs = v @ logistic_hvp(w, u, task.data, None, SEQ)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_hvp_positive_semidefinite(self):
        task = make_logistic(6, seed=11)
        rng = np.random.default_rng(12)
        w = rng.uniform(-2, 2, 6)
        for _ in range(50):
            v = rng.standard_normal(6)
            assert v @ logistic_hvp(w, v, task.data, None, SEQ) >= 0.0

    def test_backend_bit_equality(self):
        task = make_logistic(20, seed=13)
        rng = np.random.default_rng(14)
        w = rng.standard_normal(20)
        v = rng.standard_normal(20)
        idx = np.arange(0, 600, 3)
        assert logistic_loss(w, task.data, idx, SEQ) == logistic_loss(w, task.data, idx, PAR)
        np.testing.assert_array_equal(
            logistic_gradient(w, task.data, idx, SEQ), logistic_gradient(w, task.data, idx, PAR)
        )
        np.testing.assert_array_equal(
            logistic_hvp(w, v, task.data, idx, SEQ), logistic_hvp(w, v, task.data, idx, PAR)
        )

    def test_dimension_error(self):
        task = make_logistic(4, seed=15)
        with pytest.raises(DimensionMismatch):
            logistic_loss(np.zeros(5), task.data, None, SEQ)
