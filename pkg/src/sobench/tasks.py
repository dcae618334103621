"""The three problem definitions: objectives, gradients, and FW adapters.

All heavy arithmetic goes through backend kernels, so every quantity here
is bit-identical across the sequential and data-parallel backends. The
mean-variance quadratic is always evaluated through two rectangular
matvecs with the centered sample matrix; the d x d covariance is never
formed (at d = 1e5 it would hold 1e10 entries).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .backend import Backend, as_matrix, as_vector
from .errors import (
    ConfigurationError,
    DimensionMismatch,
    InsufficientSamples,
    InvalidConstraint,
)
from .lmo import PolytopeSet, SimplexSlackSet, lmo_general, lmo_simplex_slack, lmo_single_budget
from .sampling import ClassificationData, GaussianSpec, RngStream, sample_demands, sample_returns

FEAS_TOL = 1e-10


# ---------------------------------------------------------------------------
# Task 1: mean-variance portfolio
# ---------------------------------------------------------------------------


@dataclass
class MeanVarTask:
    """Return distribution for the mean-variance objective."""

    spec: GaussianSpec

    @property
    def dimension(self) -> int:
        return self.spec.dimension


@dataclass
class MeanVarSampleSet:
    """One resampling epoch's draws plus their mean and centered matrix."""

    samples: np.ndarray  # N x d
    mean: np.ndarray  # column average
    centered: np.ndarray  # samples - mean
    count: int


def build_sample_set(samples: np.ndarray, backend: Backend) -> MeanVarSampleSet:
    samples = as_matrix(samples)
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamples("sample covariance needs at least 2 rows")
    col_sums = backend.matvec_t(samples, np.ones(n))
    mean = col_sums * (1.0 / n)
    centered = samples - mean[None, :]
    return MeanVarSampleSet(samples=samples, mean=mean, centered=centered, count=n)


def mv_objective(w, ss: MeanVarSampleSet, backend: Backend) -> float:
    """0.5/(N-1) * |Xc w|^2 - w.mean via q = Xc w; never forms the covariance."""
    w = as_vector(w)
    if w.size != ss.mean.size:
        raise DimensionMismatch("weight length != asset count")
    q = backend.matvec(ss.centered, w)
    quad = backend.dot(q, q)
    lin = backend.dot(w, ss.mean)
    return 0.5 * quad / (ss.count - 1) - lin


def mv_gradient(w, ss: MeanVarSampleSet, backend: Backend) -> np.ndarray:
    """(1/(N-1)) Xc^T (Xc w) - mean."""
    w = as_vector(w)
    if w.size != ss.mean.size:
        raise DimensionMismatch("weight length != asset count")
    q = backend.matvec(ss.centered, w)
    gq = backend.matvec_t(ss.centered, q)
    return gq * (1.0 / (ss.count - 1)) - ss.mean


# ---------------------------------------------------------------------------
# Task 2: multi-product newsvendor
# ---------------------------------------------------------------------------


@dataclass
class NewsvendorTask:
    """Per-product costs and Gaussian demand parameters plus the budget set.

    Either ``budget_costs``/``budget`` (single resource, the benchmark
    default) or ``polytope`` (small multi-resource instances) must be set.
    """

    unit_cost: np.ndarray  # k
    holding_cost: np.ndarray  # h, may be negative (scrap value)
    selling_value: np.ndarray  # v
    demand_mean: np.ndarray
    demand_std: np.ndarray
    budget_costs: np.ndarray | None = None  # c > 0
    budget: float | None = None  # C > 0
    polytope: PolytopeSet | None = None

    def __post_init__(self):
        self.unit_cost = as_vector(self.unit_cost)
        self.holding_cost = as_vector(self.holding_cost)
        self.selling_value = as_vector(self.selling_value)
        self.demand_mean = as_vector(self.demand_mean)
        self.demand_std = as_vector(self.demand_std)
        n = self.unit_cost.size
        for v in (self.holding_cost, self.selling_value, self.demand_mean, self.demand_std):
            if v.size != n:
                raise DimensionMismatch("newsvendor parameter vectors must share one length")
        if not np.all(self.selling_value + self.holding_cost > 0):
            raise InvalidConstraint("need v + h > 0 per product (convex per-product cost)")
        if not np.all(self.unit_cost - self.selling_value < 0):
            raise InvalidConstraint("need k - v < 0 per product (nondegenerate stocking)")
        if not np.all(self.demand_std > 0):
            raise InvalidConstraint("demand std must be > 0")
        has_budget = self.budget_costs is not None and self.budget is not None
        if has_budget == (self.polytope is not None):
            raise ConfigurationError("set exactly one of (budget_costs, budget) or polytope")
        if has_budget:
            self.budget_costs = as_vector(self.budget_costs)
            if self.budget_costs.size != n:
                raise DimensionMismatch("budget cost length mismatch")
            if not np.all(self.budget_costs > 0) or not self.budget > 0:
                raise InvalidConstraint("budget data must be strictly positive")

    @property
    def dimension(self) -> int:
        return self.unit_cost.size


def nv_gradient_hat(x, demands: np.ndarray, task: NewsvendorTask, backend: Backend) -> np.ndarray:
    """Monte-Carlo gradient: k - v + (h+v) * empirical CDF at x.

    ``demands`` holds one ascending-sorted sample row per product; the CDF
    query is a binary search per product.
    """
    x = as_vector(x)
    demands = as_matrix(demands)
    if demands.shape[0] != x.size:
        raise DimensionMismatch("demand rows != product count")
    if demands.shape[1] == 0:
        raise InsufficientSamples("empty demand sample array")
    counts = np.empty(x.size, np.int64)
    backend.run_blocks(
        x.size,
        lambda r0, r1: _kernels.ecdf_count_block(demands, x, counts, r0, r1),
        work_per_unit=max(int(demands.shape[1]).bit_length(), 1),
    )
    frac = counts / demands.shape[1]
    return task.unit_cost - task.selling_value + (task.holding_cost + task.selling_value) * frac


def nv_gradient_exact(x, task: NewsvendorTask, backend: Backend) -> np.ndarray:
    """k - v + (h+v) * Phi((x - mu)/sigma) with the exact Gaussian CDF."""
    x = as_vector(x)
    if x.size != task.dimension:
        raise DimensionMismatch("stock vector length != product count")
    z = (x - task.demand_mean) / task.demand_std
    cdf = np.empty(x.size)
    backend.run_blocks(x.size, lambda lo, hi: _kernels.normal_cdf_block(z, cdf, lo, hi))
    return task.unit_cost - task.selling_value + (task.holding_cost + task.selling_value) * cdf


def nv_objective_exact(x, task: NewsvendorTask, backend: Backend) -> float:
    """Expected cost under Gaussian demand, summed with the fixed tree."""
    x = as_vector(x)
    if x.size != task.dimension:
        raise DimensionMismatch("stock vector length != product count")
    terms = np.empty(x.size)
    backend.run_blocks(
        x.size,
        lambda lo, hi: _kernels.newsvendor_cost_block(
            x, task.demand_mean, task.demand_std,
            task.unit_cost, task.holding_cost, task.selling_value,
            terms, lo, hi,
        ),
    )
    return backend.vec_sum(terms)


# ---------------------------------------------------------------------------
# Task 3: binary classification (logistic loss)
# ---------------------------------------------------------------------------


@dataclass
class LogisticTask:
    data: ClassificationData

    @property
    def dimension(self) -> int:
        return self.data.n_features


def _batch(data: ClassificationData, indices) -> tuple[np.ndarray, np.ndarray]:
    if indices is None:
        return data.features, data.labels
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ConfigurationError("empty index set")
    if indices.min() < 0 or indices.max() >= data.n_samples:
        raise ConfigurationError("batch index out of range")
    return data.features[indices], data.labels[indices]


def logistic_loss(w, data: ClassificationData, indices, backend: Backend) -> float:
    """Mean negative log-likelihood over the given rows (None = all rows)."""
    w = as_vector(w)
    xb, zb = _batch(data, indices)
    if w.size != xb.shape[1]:
        raise DimensionMismatch("weight length != feature count")
    t = backend.matvec(xb, w)
    terms = np.empty(t.size)
    backend.run_blocks(t.size, lambda lo, hi: _kernels.logistic_loss_block(t, zb, terms, lo, hi))
    return backend.vec_sum(terms) / t.size


def logistic_gradient(w, data: ClassificationData, indices, backend: Backend) -> np.ndarray:
    """(1/b) X_b^T (c - z) over the batch rows."""
    w = as_vector(w)
    xb, zb = _batch(data, indices)
    if w.size != xb.shape[1]:
        raise DimensionMismatch("weight length != feature count")
    t = backend.matvec(xb, w)
    c = backend.map_kernel("sigmoid", t)
    return backend.matvec_t(xb, c - zb) * (1.0 / t.size)


def logistic_hvp(w, v, data: ClassificationData, indices, backend: Backend) -> np.ndarray:
    """Sub-sampled Hessian-vector product, matrix-free.

    (1/b) X_b^T diag(c (1-c)) X_b v; the n x n Hessian is never formed.
    """
    w = as_vector(w)
    v = as_vector(v)
    xb, _ = _batch(data, indices)
    if w.size != xb.shape[1] or v.size != xb.shape[1]:
        raise DimensionMismatch("vector length != feature count")
    t = backend.matvec(xb, w)
    c = backend.map_kernel("sigmoid", t)
    tv = backend.matvec(xb, v)
    weighted = c * (1.0 - c) * tv
    return backend.matvec_t(xb, weighted) * (1.0 / t.size)


# ---------------------------------------------------------------------------
# Frank-Wolfe problem adapters
# ---------------------------------------------------------------------------


class MeanVarProblem:
    """Mean-variance task wired for the FW engine: sampled objective/gradient."""

    name = "meanvar"

    def __init__(self, task: MeanVarTask, backend: Backend):
        self.task = task
        self.backend = backend
        self.constraint = SimplexSlackSet(task.dimension)
        self.sample_set: MeanVarSampleSet | None = None

    @property
    def dimension(self) -> int:
        return self.task.dimension

    def resample(self, stream: RngStream, n_samples: int) -> None:
        draws = sample_returns(self.task.spec, n_samples, stream, self.backend)
        self.sample_set = build_sample_set(draws, self.backend)

    def objective(self, w) -> float:
        return mv_objective(w, self.sample_set, self.backend)

    def gradient(self, w) -> np.ndarray:
        return mv_gradient(w, self.sample_set, self.backend)

    def lmo(self, g) -> np.ndarray:
        return lmo_simplex_slack(g)

    def check_feasible(self, w) -> bool:
        return bool(np.all(w >= -FEAS_TOL) and np.sum(w) <= 1.0 + FEAS_TOL)


class NewsvendorProblem:
    """Newsvendor task wired for FW: sampled gradient, exact recorded objective.

    The closed-form Gaussian objective is available, so traces use it; the
    optimizer itself only ever sees the Monte-Carlo gradient.
    """

    name = "newsvendor"

    def __init__(self, task: NewsvendorTask, backend: Backend):
        self.task = task
        self.backend = backend
        self.demands: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return self.task.dimension

    def resample(self, stream: RngStream, n_samples: int) -> None:
        self.demands = sample_demands(
            self.task.demand_mean, self.task.demand_std, n_samples, stream, self.backend
        )

    def objective(self, x) -> float:
        return nv_objective_exact(x, self.task, self.backend)

    def gradient(self, x) -> np.ndarray:
        return nv_gradient_hat(x, self.demands, self.task, self.backend)

    def lmo(self, g) -> np.ndarray:
        if self.task.polytope is not None:
            return lmo_general(g, self.task.polytope)
        return lmo_single_budget(g, self.task.budget_costs, self.task.budget)

    def check_feasible(self, x) -> bool:
        if np.any(x < -FEAS_TOL):
            return False
        if self.task.polytope is not None:
            lhs = self.backend.matvec(self.task.polytope.A, x)
            return bool(np.all(lhs <= self.task.polytope.C * (1.0 + FEAS_TOL)))
        spent = self.backend.dot(self.task.budget_costs, x)
        return spent <= self.task.budget * (1.0 + FEAS_TOL)
