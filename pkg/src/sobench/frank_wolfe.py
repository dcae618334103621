"""Generic stochastic Frank-Wolfe engine shared by tasks 1 and 2.

Runs K resampling epochs of M inner iterations each. The sample set is
redrawn at every epoch start from the optimizer stream and held fixed for
the epoch; the step size decays as 2/(global_step + 2) where global_step
= k*M + m.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .backend import Backend
from .errors import ConfigurationError, DimensionMismatch, InvalidConstraint, RunAborted
from .records import RunRecord, TraceBuilder
from .sampling import RngStream

SAMPLE_SCHEDULES = ("constant", "linear")


@dataclass
class FwConfig:
    """Iteration budget and sampling plan for one FW run."""

    epochs: int  # K
    inner_iters: int  # M
    sample_size: int  # N (task 1) or per-product S (task 2)
    stream: RngStream
    sample_schedule: str = "constant"

    def __post_init__(self):
        if self.epochs < 1 or self.inner_iters < 1:
            raise ConfigurationError("epochs and inner_iters must be >= 1")
        if self.sample_size < 1:
            raise ConfigurationError("sample_size must be >= 1")
        if self.sample_schedule not in SAMPLE_SCHEDULES:
            raise ConfigurationError(f"unknown sample schedule {self.sample_schedule!r}")

    def epoch_sample_size(self, epoch: int) -> int:
        if self.sample_schedule == "linear":
            return self.sample_size * (epoch + 1)
        return self.sample_size


@dataclass
class FwState:
    """Iterate plus epoch/inner counters; global_step = epoch*M + inner."""

    iterate: np.ndarray
    epoch: int
    inner: int
    inner_iters: int

    @property
    def global_step(self) -> int:
        return self.epoch * self.inner_iters + self.inner


def fw_step_size(epoch: int, inner_iters: int, inner: int) -> float:
    """Decaying step 2/(k*M + m + 2)."""
    if epoch < 0 or not 0 <= inner < inner_iters:
        raise ConfigurationError(f"bad step counters k={epoch}, m={inner}, M={inner_iters}")
    return 2.0 / (epoch * inner_iters + inner + 2)


def fw_update(state: FwState, s, backend: Backend) -> FwState:
    """Convex-combination step toward the LMO vertex; advances counters."""
    s = np.asarray(s, dtype=np.float64)
    if s.size != state.iterate.size:
        raise DimensionMismatch("LMO vertex length != iterate length")
    gamma = fw_step_size(state.epoch, state.inner_iters, state.inner)
    direction = backend.axpy(-1.0, state.iterate, s)  # s - w
    new_iterate = backend.axpy(gamma, direction, state.iterate)
    inner = state.inner + 1
    epoch = state.epoch
    if inner == state.inner_iters:
        epoch += 1
        inner = 0
    return FwState(new_iterate, epoch, inner, state.inner_iters)


def duality_gap(g, x, s, backend: Backend) -> float:
    """g.(x - s): upper-bounds f(x) - f* for convex f when s is the LMO point."""
    diff = backend.axpy(-1.0, s, x)
    return backend.dot(g, diff)


def fw_run(problem, config: FwConfig, backend: Backend, *,
           task_label: str | None = None, size: int | None = None,
           rep: int = 0) -> RunRecord:
    """Run K*M Frank-Wolfe steps and record the per-iteration trace.

    The trace objective at step t is the new iterate's objective under the
    epoch's current sample set. On failure the partial trace is attached
    to the raised RunAborted.
    """
    trace = TraceBuilder()
    state = FwState(np.zeros(problem.dimension), 0, 0, config.inner_iters)
    label = task_label or getattr(problem, "name", "task")
    dim = size if size is not None else problem.dimension
    start = time.perf_counter_ns()
    try:
        step = 0
        for k in range(config.epochs):
            problem.resample(config.stream, config.epoch_sample_size(k))
            for _ in range(config.inner_iters):
                g = problem.gradient(state.iterate)
                s = problem.lmo(g)
                state = fw_update(state, s, backend)
                if not problem.check_feasible(state.iterate):
                    raise InvalidConstraint(f"iterate infeasible at step {step + 1}")
                f = problem.objective(state.iterate)
                step += 1
                trace.append(step, f, time.perf_counter_ns() - start)
    except Exception as exc:
        partial = trace.build(label, dim, backend.kind, rep, config.stream.seed, state.iterate)
        raise RunAborted(f"frank-wolfe run failed at step {len(trace) + 1}: {exc}", partial) from exc
    return trace.build(label, dim, backend.kind, rep, config.stream.seed, state.iterate)
