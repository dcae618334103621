"""Dense vector/matrix kernels with sequential and data-parallel backends.

Vectors and matrices are plain C-contiguous float64 numpy arrays. The two
backends expose the same five kernels (dot, matvec, matvec_t, axpy,
map_kernel) plus a tree sum, and are contractually bit-identical: every
reduction follows the fixed chunked tree documented in ``_kernels``, so the
parallel backend only changes *who* computes each chunk, never the float
summation order.

The data-parallel backend partitions chunk indices (reductions) or element
ranges (maps) over a thread pool sized to the hardware thread count; the
numba kernels release the GIL so the workers genuinely overlap. Kernels
are internally parallel but externally synchronous, and hold no shared
mutable state, so callers may invoke them concurrently on disjoint data.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DimensionMismatch

DEFAULT_CHUNK = 4096

# Below this many scalar operations the parallel backend runs inline;
# purely a scheduling decision, results are identical either way.
_MIN_PARALLEL_WORK = 1 << 15

MAP_KERNELS = ("sigmoid", "negate", "exp")


def as_vector(x) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected 1-D vector, got shape {v.shape}")
    return v


def as_matrix(a) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected 2-D matrix, got shape {m.shape}")
    return m


class Backend:
    """Shared kernel surface; subclasses decide how ranges are executed."""

    kind = "abstract"

    def __init__(self, chunk_size: int = DEFAULT_CHUNK):
        if chunk_size < 1:
            raise ConfigurationError(f"chunk_size must be >= 1, got {chunk_size}")
        self.chunk_size = int(chunk_size)

    # -- range scheduling -------------------------------------------------

    def _split(self, n_units: int, work_per_unit: int):
        raise NotImplementedError

    def _dispatch(self, ranges, fn):
        raise NotImplementedError

    def run_blocks(self, n_units: int, fn, work_per_unit: int = 1):
        """Run fn(lo, hi) over a partition of range(n_units).

        The partition never affects results; kernels driven through here
        must be pure functions of their index range.
        """
        if n_units <= 0:
            return
        self._dispatch(self._split(n_units, work_per_unit), fn)

    # -- reductions --------------------------------------------------------

    def dot(self, x, y) -> float:
        x = as_vector(x)
        y = as_vector(y)
        if x.size != y.size:
            raise DimensionMismatch(f"dot: lengths {x.size} != {y.size}")
        n = x.size
        if n == 0:
            return 0.0
        chunk = self.chunk_size
        nch = (n + chunk - 1) // chunk
        partials = np.empty(nch)
        self.run_blocks(
            nch,
            lambda c0, c1: _kernels.dot_partials(x, y, chunk, partials, c0, c1),
            work_per_unit=chunk,
        )
        return float(_kernels.fold_pairwise(partials, nch))

    def vec_sum(self, x) -> float:
        x = as_vector(x)
        n = x.size
        if n == 0:
            return 0.0
        chunk = self.chunk_size
        nch = (n + chunk - 1) // chunk
        partials = np.empty(nch)
        self.run_blocks(
            nch,
            lambda c0, c1: _kernels.sum_partials(x, chunk, partials, c0, c1),
            work_per_unit=chunk,
        )
        return float(_kernels.fold_pairwise(partials, nch))

    def matvec(self, a, x) -> np.ndarray:
        a = as_matrix(a)
        x = as_vector(x)
        rows, cols = a.shape
        if cols != x.size:
            raise DimensionMismatch(f"matvec: {a.shape} @ ({x.size},)")
        out = np.empty(rows)
        chunk = self.chunk_size
        self.run_blocks(
            rows,
            lambda r0, r1: _kernels.matvec_rows(a, x, out, chunk, r0, r1),
            work_per_unit=max(cols, 1),
        )
        return out

    def matvec_t(self, a, x) -> np.ndarray:
        a = as_matrix(a)
        x = as_vector(x)
        rows, cols = a.shape
        if rows != x.size:
            raise DimensionMismatch(f"matvec_t: {a.shape}^T @ ({x.size},)")
        out = np.empty(cols)
        chunk = self.chunk_size
        self.run_blocks(
            cols,
            lambda j0, j1: _kernels.matvec_t_cols(a, x, out, chunk, j0, j1),
            work_per_unit=max(rows, 1),
        )
        return out

    # -- elementwise -------------------------------------------------------

    def axpy(self, alpha: float, x, y) -> np.ndarray:
        x = as_vector(x)
        y = as_vector(y)
        if x.size != y.size:
            raise DimensionMismatch(f"axpy: lengths {x.size} != {y.size}")
        return alpha * x + y

    def map_kernel(self, kernel: str, x) -> np.ndarray:
        x = as_vector(x)
        if kernel == "negate":
            return np.negative(x)
        if kernel == "sigmoid":
            block = _kernels.sigmoid_block
        elif kernel == "exp":
            block = _kernels.exp_block
        else:
            raise ConfigurationError(f"unknown map kernel {kernel!r}")
        out = np.empty(x.size)
        self.run_blocks(x.size, lambda lo, hi: block(x, out, lo, hi))
        return out


class SequentialBackend(Backend):
    kind = "sequential"

    def _split(self, n_units, work_per_unit):
        return ((0, n_units),)

    def _dispatch(self, ranges, fn):
        for lo, hi in ranges:
            fn(lo, hi)


class ParallelBackend(Backend):
    kind = "parallel"

    def __init__(self, chunk_size: int = DEFAULT_CHUNK, workers: int | None = None):
        super().__init__(chunk_size)
        self.workers = int(workers) if workers else (os.cpu_count() or 1)
        self._pool = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None

    def _split(self, n_units, work_per_unit):
        if (
            self._pool is None
            or n_units < 2
            or n_units * work_per_unit < _MIN_PARALLEL_WORK
        ):
            return ((0, n_units),)
        parts = min(self.workers, n_units)
        step = (n_units + parts - 1) // parts
        return tuple((lo, min(lo + step, n_units)) for lo in range(0, n_units, step))

    def _dispatch(self, ranges, fn):
        if len(ranges) == 1:
            lo, hi = ranges[0]
            fn(lo, hi)
            return
        futures = [self._pool.submit(fn, lo, hi) for lo, hi in ranges]
        for f in futures:
            f.result()


def make_backend(kind: str, chunk_size: int = DEFAULT_CHUNK, workers: int | None = None) -> Backend:
    """Build a backend from its config-string name."""
    if kind == "sequential":
        return SequentialBackend(chunk_size)
    if kind == "parallel":
        return ParallelBackend(chunk_size, workers)
    raise ConfigurationError(f"unknown backend {kind!r} (expected 'sequential' or 'parallel')")
