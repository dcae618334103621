"""Stochastic quasi-Newton optimizer for the classification task.

Each iteration takes a mini-batch gradient step, scaled by a dense BFGS
inverse-Hessian approximation once enough correction pairs exist. Every L
iterations the averaged iterate over the window is compared with the
previous window's average; their difference s and the sub-sampled
Hessian-vector product y = H_sub s form a correction pair. The inverse
Hessian is rebuilt from the most recent pairs (ring buffer of capacity
``memory``) starting from a scaled identity.

Bookkeeping follows the reference schedule literally: the pair counter t
starts at -1 and the first window produces no pair, so the first pair
appears at iteration 2L and the first scaled step at 2L + 1. A pair whose
curvature s.y is not safely positive is skipped (the update divides by
it) and logged on the run record.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .backend import Backend
from .errors import ConfigurationError, DegeneratePair, RunAborted
from .records import RunRecord, TraceBuilder
from .sampling import RngStream, sample_indices
from .tasks import LogisticTask, logistic_gradient, logistic_hvp, logistic_loss

CURVATURE_RTOL = 1e-10


@dataclass
class SqnConfig:
    pair_every: int  # L
    memory: int  # M
    beta: float
    grad_batch: int  # b
    hess_batch: int  # b_H
    iterations: int  # K
    stream: RngStream

    def __post_init__(self):
        if self.pair_every < 1 or self.memory < 1 or self.iterations < 1:
            raise ConfigurationError("pair_every, memory, and iterations must be >= 1")
        if self.beta <= 0:
            raise ConfigurationError("beta must be > 0")
        if self.grad_batch < 1 or self.hess_batch < 1:
            raise ConfigurationError("batch sizes must be >= 1")


@dataclass
class CorrectionPair:
    s: np.ndarray
    y: np.ndarray
    curvature: float  # y.s


@dataclass
class SqnState:
    w: np.ndarray
    wbar_accum: np.ndarray
    wbar_prev: np.ndarray | None
    t: int  # pairs computed so far; starts at -1
    pairs: deque  # most recent CorrectionPairs, maxlen = memory
    k: int  # iteration counter
    inv_hessian: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)


def hessian_update(pairs, t: int, memory: int, backend: Backend) -> np.ndarray:
    """Rebuild the dense inverse-Hessian approximation from recent pairs.

    Starts from (s.y / y.y) I for the newest pair and applies the BFGS
    inverse update for each stored pair in chronological order. The
    rank-two form H - rho(s u^T + u s^T) + (rho^2 kappa + rho) s s^T with
    u = H y, kappa = y.H y is the algebraic expansion of
    (I - rho s y^T) H (I - rho y s^T) + rho s s^T.
    """
    pairs = list(pairs)
    if t < 1 or not pairs:
        raise ConfigurationError("hessian update needs t >= 1 and at least one pair")
    if len(pairs) > min(t, memory):
        raise ConfigurationError("more pairs supplied than min(t, memory)")
    newest = pairs[-1]
    yy = backend.dot(newest.y, newest.y)
    if yy == 0.0:
        raise DegeneratePair("correction pair has zero y")
    n = newest.s.size
    h = np.zeros((n, n))
    np.fill_diagonal(h, newest.curvature / yy)
    for pair in pairs:
        if pair.curvature <= 0.0:
            raise DegeneratePair("correction pair with nonpositive curvature")
        rho = 1.0 / pair.curvature
        u = backend.matvec(h, pair.y)
        kappa = backend.dot(pair.y, u)
        s = pair.s
        backend.run_blocks(
            n,
            lambda r0, r1: _kernels.bfgs_rank2_block(
                h, s, u, -rho, rho * rho * kappa + rho, r0, r1
            ),
            work_per_unit=n,
        )
    return h


class SqnEngine:
    """Stepwise driver; ``run`` loops it, tests can poke at ``state``."""

    def __init__(self, task: LogisticTask, config: SqnConfig, backend: Backend):
        if config.grad_batch > task.data.n_samples or config.hess_batch > task.data.n_samples:
            raise ConfigurationError("batch size exceeds dataset size")
        self.task = task
        self.config = config
        self.backend = backend
        n = task.dimension
        self.state = SqnState(
            w=np.zeros(n),
            wbar_accum=np.zeros(n),
            wbar_prev=None,
            t=-1,
            pairs=deque(maxlen=config.memory),
            k=0,
        )

    def step(self) -> None:
        """One iteration: gradient step, then pair/Hessian maintenance."""
        st = self.state
        cfg = self.config
        backend = self.backend
        data = self.task.data
        k = st.k + 1

        batch = sample_indices(data.n_samples, cfg.grad_batch, cfg.stream)
        g = logistic_gradient(st.w, data, batch, backend)
        st.wbar_accum = st.wbar_accum + st.w
        alpha = cfg.beta / k
        if k <= 2 * cfg.pair_every or st.inv_hessian is None:
            if k > 2 * cfg.pair_every and st.inv_hessian is None:
                st.warnings.append(f"iteration {k}: no usable correction pair yet, plain gradient step")
            st.w = st.w - alpha * g
        else:
            st.w = st.w - alpha * backend.matvec(st.inv_hessian, g)

        if k % cfg.pair_every == 0:
            st.t += 1
            wbar_new = st.wbar_accum * (1.0 / cfg.pair_every)
            if st.t > 0:
                hess_batch = sample_indices(data.n_samples, cfg.hess_batch, cfg.stream)
                s = wbar_new - st.wbar_prev
                y = logistic_hvp(wbar_new, s, data, hess_batch, backend)
                curvature = backend.dot(s, y)
                floor = CURVATURE_RTOL * math.sqrt(backend.dot(s, s)) * math.sqrt(backend.dot(y, y))
                if curvature > floor:
                    st.pairs.append(CorrectionPair(s=s, y=y, curvature=curvature))
                    st.inv_hessian = hessian_update(st.pairs, st.t, cfg.memory, backend)
                else:
                    st.warnings.append(
                        f"iteration {k}: correction pair skipped (curvature {curvature:.3e} <= floor)"
                    )
            st.wbar_prev = wbar_new
            st.wbar_accum = np.zeros_like(st.wbar_accum)
        st.k = k

    def full_objective(self) -> float:
        return logistic_loss(self.state.w, self.task.data, None, self.backend)


def sqn_run(task: LogisticTask, config: SqnConfig, backend: Backend, *,
            task_label: str = "classification", size: int | None = None,
            rep: int = 0) -> RunRecord:
    """Run K iterations; records the full-data objective each iteration."""
    engine = SqnEngine(task, config, backend)
    trace = TraceBuilder()
    dim = size if size is not None else task.dimension
    start = time.perf_counter_ns()
    try:
        for _ in range(config.iterations):
            engine.step()
            f = engine.full_objective()
            trace.append(engine.state.k, f, time.perf_counter_ns() - start)
    except Exception as exc:
        trace.warnings = list(engine.state.warnings)
        partial = trace.build(task_label, dim, backend.kind, rep, config.stream.seed, engine.state.w)
        raise RunAborted(f"sqn run failed at iteration {engine.state.k + 1}: {exc}", partial) from exc
    trace.warnings = list(engine.state.warnings)
    return trace.build(task_label, dim, backend.kind, rep, config.stream.seed, engine.state.w)
