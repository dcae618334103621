"""Counter-based random streams and all task-specific samplers.

A stream is the triple (seed, stream_id, counter) keying a Philox
counter-based generator (numpy's Philox-4x64-10 bit generator). Every
block of four doubles is a pure function of (seed, stream_id, block
index), so disjoint counter ranges can be generated in any order, by any
thread, with the same result; advancing the counter after a draw is the
only mutation. The data-parallel backend exploits exactly this to fill
large sample buffers concurrently.

Normals come from Box-Muller on consecutive uniform pairs, consuming
exactly two uniforms per two normals so that counter usage is identical
on both backends.

Stream-id allocation used by the benchmark driver:
    stream 0      problem-instance generation
    stream 1      optimizer sampling (single, non-repeated runs)
    stream 2 + k  optimizer sampling for repetition k
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .backend import Backend, SequentialBackend, as_matrix, as_vector
from .errors import (
    ConfigurationError,
    DimensionMismatch,
    EmptyRequest,
    InsufficientSamples,
    InvalidConstraint,
)

_U64 = (1 << 64) - 1
_U128 = (1 << 128) - 1

# Doubles generated per Philox block (4x64 words, one double per word).
_BLOCK = 4

# Fixed generation grid: samplers fill buffers in spans of this many
# doubles (block-aligned, even) regardless of backend, so chunked parallel
# generation reproduces the sequential stream bit for bit.
SAMPLE_SPAN = 1 << 16

_default_backend = SequentialBackend()


@dataclass
class RngStream:
    """Reproducible random stream position; value-semantic and cheap to copy."""

    seed: int
    stream_id: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned int, got {self.seed}")
        if not 0 <= self.stream_id <= _U64:
            raise ConfigurationError(f"stream_id must be a 64-bit unsigned int, got {self.stream_id}")
        if not 0 <= self.counter <= _U128:
            raise ConfigurationError("counter must fit in 128 bits")

    def substream(self, stream_id: int) -> "RngStream":
        """Fresh stream with the same seed and counter zero."""
        return RngStream(self.seed, stream_id)

    def clone(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.counter)

    def _generator_at(self, block_offset: int) -> np.random.Generator:
        ctr = self.counter + block_offset
        counter_words = np.array(
            [ctr & _U64, (ctr >> 64) & _U64, 0, 0], dtype=np.uint64
        )
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter_words, key=key))


def _span_ranges(n: int):
    return [(lo, min(lo + SAMPLE_SPAN, n)) for lo in range(0, n, SAMPLE_SPAN)]


def uniform01(stream: RngStream, n: int, backend: Backend | None = None) -> np.ndarray:
    """n doubles in [0, 1); advances the counter by ceil(n/4) blocks."""
    if n <= 0:
        raise EmptyRequest(f"requested {n} uniforms")
    backend = backend or _default_backend
    out = np.empty(n)
    spans = _span_ranges(n)

    def fill(i0, i1):
        for lo, hi in spans[i0:i1]:
            gen = stream._generator_at(lo // _BLOCK)
            gen.random(out=out[lo:hi])

    backend.run_blocks(len(spans), fill, work_per_unit=SAMPLE_SPAN)
    stream.counter += (n + _BLOCK - 1) // _BLOCK
    return out


def standard_normal(stream: RngStream, n: int, backend: Backend | None = None) -> np.ndarray:
    """n i.i.d. N(0,1) draws via Box-Muller on consecutive uniform pairs."""
    if n <= 0:
        raise EmptyRequest(f"requested {n} normals")
    backend = backend or _default_backend
    m = 2 * ((n + 1) // 2)
    u = uniform01(stream, m, backend)
    z = np.empty(m)
    spans = _span_ranges(m)

    def transform(i0, i1):
        for lo, hi in spans[i0:i1]:
            _kernels.boxmuller_block(u, z, lo, hi)

    backend.run_blocks(len(spans), transform, work_per_unit=SAMPLE_SPAN)
    return z if m == n else z[:n].copy()


@dataclass
class GaussianSpec:
    """Mean plus either a per-coordinate std or a lower-triangular factor."""

    mean: np.ndarray
    diag_std: np.ndarray | None = None
    chol_factor: np.ndarray | None = None

    def __post_init__(self):
        self.mean = as_vector(self.mean)
        if (self.diag_std is None) == (self.chol_factor is None):
            raise ConfigurationError("provide exactly one of diag_std / chol_factor")
        if self.diag_std is not None:
            self.diag_std = as_vector(self.diag_std)
            if self.diag_std.size != self.mean.size:
                raise DimensionMismatch("diag_std length != mean length")
            if not np.all(self.diag_std > 0):
                raise InvalidConstraint("diag_std entries must be > 0")
        else:
            self.chol_factor = as_matrix(self.chol_factor)
            d = self.mean.size
            if self.chol_factor.shape != (d, d):
                raise DimensionMismatch("chol_factor must be d x d")
            if not np.all(np.diag(self.chol_factor) > 0):
                raise InvalidConstraint("chol_factor diagonal must be > 0")
            if np.any(np.triu(self.chol_factor, 1) != 0):
                raise InvalidConstraint("chol_factor must be lower-triangular")

    @property
    def dimension(self) -> int:
        return self.mean.size


def sample_returns(
    spec: GaussianSpec, n_samples: int, stream: RngStream, backend: Backend | None = None
) -> np.ndarray:
    """N x d matrix of draws from the Gaussian spec."""
    if n_samples < 2:
        raise InsufficientSamples(f"need at least 2 samples for a sample covariance, got {n_samples}")
    backend = backend or _default_backend
    d = spec.dimension
    z = standard_normal(stream, n_samples * d, backend).reshape(n_samples, d)
    if spec.diag_std is not None:
        return spec.mean[None, :] + spec.diag_std[None, :] * z
    out = np.empty((n_samples, d))
    for i in range(n_samples):
        out[i] = spec.mean + backend.matvec(spec.chol_factor, z[i])
    return out


def sample_demands(
    mu, sigma, n_samples: int, stream: RngStream, backend: Backend | None = None
) -> np.ndarray:
    """Per-product demand draws, each row sorted ascending.

    Sorting once per resampling epoch turns the empirical-CDF query in the
    gradient into a binary search per product.
    """
    mu = as_vector(mu)
    sigma = as_vector(sigma)
    if mu.size != sigma.size:
        raise DimensionMismatch("mu and sigma lengths differ")
    if not np.all(sigma > 0):
        raise InvalidConstraint("sigma entries must be > 0")
    if n_samples < 1:
        raise EmptyRequest("need at least one demand sample per product")
    backend = backend or _default_backend
    z = standard_normal(stream, mu.size * n_samples, backend).reshape(mu.size, n_samples)
    d = mu[:, None] + sigma[:, None] * z
    d.sort(axis=1)
    return d


def sample_indices(n: int, b: int, stream: RngStream) -> np.ndarray:
    """b indices from range(n), uniform without replacement.

    Partial Fisher-Yates driven by the counter stream: one uniform per
    selected index.
    """
    if not 1 <= b <= n:
        raise ConfigurationError(f"need 1 <= b <= n, got b={b}, n={n}")
    u = uniform01(stream, b)
    idx = np.arange(n, dtype=np.int64)
    for i in range(b):
        j = i + int(u[i] * (n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:b].copy()


@dataclass
class ClassificationData:
    """Synthetic binary-feature dataset; labels already carry the noise."""

    features: np.ndarray  # N x n, entries exactly 0.0 or 1.0
    labels: np.ndarray  # length N, values 0.0 / 1.0
    true_weights: np.ndarray = field(repr=False)  # retained for diagnostics

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def synth_classification(
    n_features: int, stream: RngStream, backend: Backend | None = None
) -> ClassificationData:
    """Synthetic dataset: 30n samples of n Bernoulli(1/2) features.

    Clean labels split the data at the median of a random linear score
    (balancing the classes), then exactly floor(0.1 * N) uniformly chosen
    labels are flipped.
    """
    if n_features < 2:
        raise ConfigurationError(f"need at least 2 features, got {n_features}")
    backend = backend or _default_backend
    n_rows = 30 * n_features
    total = n_rows * n_features
    x = np.empty(total)
    spans = _span_ranges(total)

    def fill(i0, i1):
        # thresholding is exact, so generating per span keeps X identical
        # to the whole-stream draw while bounding the uniform scratch
        for lo, hi in spans[i0:i1]:
            gen = stream._generator_at(lo // _BLOCK)
            u = gen.random(hi - lo)
            x[lo:hi] = u >= 0.5

    backend.run_blocks(len(spans), fill, work_per_unit=SAMPLE_SPAN)
    stream.counter += (total + _BLOCK - 1) // _BLOCK
    features = x.reshape(n_rows, n_features)

    w_true = standard_normal(stream, n_features, backend)
    scores = _default_backend.matvec(features, w_true)  # fixed tree, backend-independent
    median = float(np.median(scores))
    labels = (scores > median).astype(np.float64)
    n_flip = n_rows // 10
    flip = sample_indices(n_rows, n_flip, stream)
    labels[flip] = 1.0 - labels[flip]
    return ClassificationData(features=features, labels=labels, true_weights=w_true)
