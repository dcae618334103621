"""Frank-Wolfe engine: step sizes, updates, traces, determinism, gap decay."""

import numpy as np
import pytest

from sobench.backend import make_backend
from sobench.errors import ConfigurationError, RunAborted
from sobench.frank_wolfe import FwConfig, FwState, duality_gap, fw_run, fw_step_size, fw_update
from sobench.lmo import lmo_simplex_slack
from sobench.sampling import GaussianSpec, RngStream
from sobench.tasks import MeanVarProblem, MeanVarTask

SEQ = make_backend("sequential")
PAR = make_backend("parallel")


class TestStepSize:
    def test_origin(self):
        assert fw_step_size(0, 25, 0) == 1.0

    def test_formula_values(self):
        assert fw_step_size(0, 25, 23) == pytest.approx(0.08)
        assert fw_step_size(2, 25, 0) == pytest.approx(2.0 / 52.0)

    def test_strictly_decreasing_in_global_step(self):
        values = [fw_step_size(k, 25, m) for k in range(4) for m in range(25)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert all(0.0 < v <= 1.0 for v in values)

    def test_bad_counters(self):
        with pytest.raises(ConfigurationError):
            fw_step_size(-1, 25, 0)
        with pytest.raises(ConfigurationError):
            fw_step_size(0, 25, 25)


class TestUpdate:
    def test_full_first_step_lands_on_vertex(self):
        state = FwState(np.zeros(3), 0, 0, 10)
        s = np.array([0.0, 1.0, 0.0])
        new = fw_update(state, s, SEQ)
        np.testing.assert_array_equal(new.iterate, s)
        assert (new.epoch, new.inner) == (0, 1)

    def test_fixed_point(self):
        w = np.array([0.25, 0.5])
        state = FwState(w.copy(), 1, 3, 10)
        new = fw_update(state, w, SEQ)
        np.testing.assert_allclose(new.iterate, w, atol=1e-16)

    def test_half_step(self):
        state = FwState(np.zeros(2), 0, 2, 10)  # gamma = 2/4 = 0.5
        new = fw_update(state, np.array([1.0, 0.0]), SEQ)
        np.testing.assert_array_equal(new.iterate, [0.5, 0.0])

    def test_epoch_rollover(self):
        state = FwState(np.zeros(1), 0, 4, 5)
        new = fw_update(state, np.zeros(1), SEQ)
        assert (new.epoch, new.inner) == (1, 0)
        assert new.global_step == 5


class ExactQuadraticProblem:
    """Mean-variance objective with exact moments; no sampling noise.

    Used to check the deterministic convergence guarantees of the engine.
    """

    name = "exact-quadratic"

    def __init__(self, mean, var, backend):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.var = np.asarray(var, dtype=np.float64)
        self.backend = backend

    @property
    def dimension(self):
        return self.mean.size

    def resample(self, stream, n):
        pass

    def objective(self, w):
        return 0.5 * float(w @ (self.var * w)) - self.backend.dot(w, self.mean)

    def gradient(self, w):
        return self.var * w - self.mean

    def lmo(self, g):
        return lmo_simplex_slack(g)

    def check_feasible(self, w):
        return bool(np.all(w >= -1e-10) and w.sum() <= 1 + 1e-10)


def tiny_meanvar_problem(backend, d=2):
    task = MeanVarTask(spec=GaussianSpec(mean=np.array([1.0, 0.5][:d]), diag_std=np.full(d, 1e-9)))
    return MeanVarProblem(task, backend)


class TestRun:
    def test_single_step_lands_on_best_vertex(self):
        problem = tiny_meanvar_problem(SEQ)
        cfg = FwConfig(epochs=1, inner_iters=1, sample_size=25, stream=RngStream(42, 1))
        record = fw_run(problem, cfg, SEQ)
        np.testing.assert_allclose(record.final_iterate, [1.0, 0.0], atol=1e-7)
        assert record.final_objective == pytest.approx(-1.0, abs=1e-6)

    def test_trace_length(self):
        problem = tiny_meanvar_problem(SEQ)
        cfg = FwConfig(epochs=3, inner_iters=7, sample_size=5, stream=RngStream(42, 1))
        record = fw_run(problem, cfg, SEQ)
        assert record.iterations.size == 21
        np.testing.assert_array_equal(record.iterations, np.arange(1, 22))
        assert np.all(np.diff(record.elapsed_ns) >= 0)

    def test_replay_and_backend_equality(self):
        rng = np.random.default_rng(0)
        spec = GaussianSpec(mean=rng.uniform(-1, 1, 40), diag_std=rng.uniform(0.01, 0.025, 40))
        task = MeanVarTask(spec=spec)
        traces = []
        for backend in (SEQ, PAR, SEQ):
            problem = MeanVarProblem(task, backend)
            cfg = FwConfig(epochs=4, inner_iters=25, sample_size=25, stream=RngStream(7, 1))
            traces.append(fw_run(problem, cfg, backend))
        np.testing.assert_array_equal(traces[0].objectives, traces[1].objectives)
        np.testing.assert_array_equal(traces[0].objectives, traces[2].objectives)
        np.testing.assert_array_equal(traces[0].final_iterate, traces[1].final_iterate)

    def test_sample_set_constant_within_epoch(self):
        problem = tiny_meanvar_problem(SEQ)
        problem.resample(RngStream(1, 1), 25)
        w = np.array([0.3, 0.2])
        g1 = problem.gradient(w)
        g2 = problem.gradient(w)
        np.testing.assert_array_equal(g1, g2)

    def test_infeasible_lmo_output_caught(self):
        class EvilProblem(ExactQuadraticProblem):
            def lmo(self, g):
                return np.full(self.dimension, 5.0)  # violates the simplex

        problem = EvilProblem(np.ones(3), np.ones(3), SEQ)
        cfg = FwConfig(epochs=1, inner_iters=3, sample_size=2, stream=RngStream(0, 1))
        with pytest.raises(RunAborted) as exc_info:
            fw_run(problem, cfg, SEQ)
        assert exc_info.value.partial_record is not None

    def test_linear_sample_schedule(self):
        sizes = []

        class SpyProblem(ExactQuadraticProblem):
            def resample(self, stream, n):
                sizes.append(n)

        problem = SpyProblem(np.ones(2), np.ones(2), SEQ)
        cfg = FwConfig(epochs=3, inner_iters=2, sample_size=10,
                       stream=RngStream(0, 1), sample_schedule="linear")
        fw_run(problem, cfg, SEQ)
        assert sizes == [10, 20, 30]

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            FwConfig(epochs=0, inner_iters=5, sample_size=5, stream=RngStream(0, 1))
        with pytest.raises(ConfigurationError):
            FwConfig(epochs=1, inner_iters=5, sample_size=5,
                     stream=RngStream(0, 1), sample_schedule="exponential")


class TestDualityGap:
    def test_zero_at_coincidence(self):
        x = np.array([0.5, 0.5])
        assert duality_gap(np.array([1.0, -1.0]), x, x, SEQ) == 0.0

    def test_hand_value(self):
        g = np.array([-1.0, 0.0])
        x = np.zeros(2)
        s = np.array([1.0, 0.0])
        assert duality_gap(g, x, s, SEQ) == 1.0

    def test_gap_decays_on_exact_quadratic(self):
        # strongly curved instance: optimum interior to a face, so the
        # gap genuinely needs many iterations to shrink
        rng = np.random.default_rng(3)
        d = 10
        problem = ExactQuadraticProblem(rng.uniform(0.5, 1.0, d), rng.uniform(5.0, 10.0, d), SEQ)
        w = np.zeros(d)
        state = FwState(w, 0, 0, 300)
        gaps = []
        for _ in range(300):
            g = problem.gradient(state.iterate)
            s = problem.lmo(g)
            gaps.append(duality_gap(g, state.iterate, s, SEQ))
            state = fw_update(state, s, SEQ)
        assert gaps[-1] < 5e-2
        assert gaps[-1] < gaps[10]
        # sublinear decay: T * gap stays bounded
        tail = [t * gaps[t] for t in range(100, 300)]
        assert max(tail) < 50 * min(max(tail[:1]), 10.0)
