"""Numba kernels behind both compute backends.

Every reduction in the toolkit uses one fixed tree so that the sequential
and the data-parallel backend produce bit-identical floats:

  * the index range is split into chunks of ``chunk`` consecutive elements,
  * each chunk is summed left to right (strictly sequential adds),
  * the chunk sums are folded pairwise in index order until one remains.

The tree is a function of (length, chunk) only. Workers may compute any
subset of chunk sums in any order without changing the result, which is
what makes cross-backend bit equality testable rather than aspirational.

Elementwise transcendentals (exp, log, sin, cos, erf) are computed here in
scalar loops instead of numpy ufuncs: numpy's SIMD paths may evaluate head
and tail elements through a different code path depending on buffer
alignment, which would break byte-level replay of benchmark traces.
"""

import math

import numpy as np
from numba import njit

TAU = 6.283185307179586  # 2*pi
SQRT1_2 = 0.7071067811865476  # 1/sqrt(2)
INV_SQRT_TAU = 0.3989422804014327  # 1/sqrt(2*pi)


@njit(cache=True, nogil=True)
def fold_pairwise(p, m):
    """Fold p[:m] pairwise in index order; destroys p, returns the root."""
    while m > 1:
        h = m // 2
        for i in range(h):
            p[i] = p[2 * i] + p[2 * i + 1]
        if m & 1:
            p[h] = p[m - 1]
            m = h + 1
        else:
            m = h
    return p[0]


@njit(cache=True, nogil=True)
def dot_partials(x, y, chunk, out, c0, c1):
    """Chunk sums of x[i]*y[i] for chunk indices [c0, c1)."""
    n = x.shape[0]
    for c in range(c0, c1):
        lo = c * chunk
        hi = min(lo + chunk, n)
        s = 0.0
        for i in range(lo, hi):
            s += x[i] * y[i]
        out[c] = s


@njit(cache=True, nogil=True)
def sum_partials(x, chunk, out, c0, c1):
    """Chunk sums of x[i] for chunk indices [c0, c1)."""
    n = x.shape[0]
    for c in range(c0, c1):
        lo = c * chunk
        hi = min(lo + chunk, n)
        s = 0.0
        for i in range(lo, hi):
            s += x[i]
        out[c] = s


@njit(cache=True, nogil=True)
def _row_dot(row, x, chunk, scratch):
    cols = row.shape[0]
    nch = (cols + chunk - 1) // chunk
    for c in range(nch):
        lo = c * chunk
        hi = min(lo + chunk, cols)
        s = 0.0
        for i in range(lo, hi):
            s += row[i] * x[i]
        scratch[c] = s
    return fold_pairwise(scratch, nch)


@njit(cache=True, nogil=True)
def matvec_rows(a, x, out, chunk, r0, r1):
    """out[r] = fixed-tree dot of row r with x, for rows [r0, r1).

    Rows are processed four at a time purely for instruction-level
    parallelism; each row's accumulation order is unchanged.
    """
    cols = a.shape[1]
    nch = (cols + chunk - 1) // chunk
    scratch = np.empty((4, nch), np.float64)
    r = r0
    while r + 4 <= r1:
        for c in range(nch):
            lo = c * chunk
            hi = min(lo + chunk, cols)
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            s3 = 0.0
            for i in range(lo, hi):
                xi = x[i]
                s0 += a[r, i] * xi
                s1 += a[r + 1, i] * xi
                s2 += a[r + 2, i] * xi
                s3 += a[r + 3, i] * xi
            scratch[0, c] = s0
            scratch[1, c] = s1
            scratch[2, c] = s2
            scratch[3, c] = s3
        out[r] = fold_pairwise(scratch[0], nch)
        out[r + 1] = fold_pairwise(scratch[1], nch)
        out[r + 2] = fold_pairwise(scratch[2], nch)
        out[r + 3] = fold_pairwise(scratch[3], nch)
        r += 4
    while r < r1:
        out[r] = _row_dot(a[r], x, chunk, scratch[0])
        r += 1


@njit(cache=True, nogil=True)
def matvec_t_cols(a, x, out, chunk, j0, j1):
    """out[j] = fixed-tree dot of column j with x, for columns [j0, j1).

    The chunk grid runs over rows; within a chunk the loop is row-major so
    memory access stays contiguous while each column's accumulation order
    remains strictly ascending in the row index.
    """
    rows = a.shape[0]
    w = j1 - j0
    nch = (rows + chunk - 1) // chunk
    p = np.zeros((nch, w), np.float64)
    for c in range(nch):
        lo = c * chunk
        hi = min(lo + chunk, rows)
        for i in range(lo, hi):
            xi = x[i]
            for j in range(w):
                p[c, j] += xi * a[i, j0 + j]
    m = nch
    while m > 1:
        h = m // 2
        for i in range(h):
            for j in range(w):
                p[i, j] = p[2 * i, j] + p[2 * i + 1, j]
        if m & 1:
            for j in range(w):
                p[h, j] = p[m - 1, j]
            m = h + 1
        else:
            m = h
    for j in range(w):
        out[j0 + j] = p[0, j]


@njit(cache=True, nogil=True)
def sigmoid_block(x, out, lo, hi):
    """Numerically stable logistic function, branch form per sign."""
    for i in range(lo, hi):
        t = x[i]
        if t >= 0.0:
            e = math.exp(-t)
            out[i] = 1.0 / (1.0 + e)
        else:
            e = math.exp(t)
            out[i] = e / (1.0 + e)


@njit(cache=True, nogil=True)
def exp_block(x, out, lo, hi):
    for i in range(lo, hi):
        out[i] = math.exp(x[i])


@njit(cache=True, nogil=True)
def boxmuller_block(u, z, lo, hi):
    """Box-Muller on consecutive uniform pairs; [lo, hi) must be even-aligned.

    Uses 1-u1 so the log argument lies in (0, 1] and never hits zero.
    """
    for p in range(lo // 2, hi // 2):
        u1 = u[2 * p]
        u2 = u[2 * p + 1]
        r = math.sqrt(-2.0 * math.log1p(-u1))
        th = TAU * u2
        z[2 * p] = r * math.cos(th)
        z[2 * p + 1] = r * math.sin(th)


@njit(cache=True, nogil=True)
def logistic_loss_block(t, z, out, lo, hi):
    """Per-sample negative log-likelihood in log1p-stable form."""
    for i in range(lo, hi):
        ti = t[i]
        if ti >= 0.0:
            out[i] = math.log1p(math.exp(-ti)) + (1.0 - z[i]) * ti
        else:
            out[i] = math.log1p(math.exp(ti)) - z[i] * ti


@njit(cache=True, nogil=True)
def normal_cdf_block(z, out, lo, hi):
    for i in range(lo, hi):
        out[i] = 0.5 * (1.0 + math.erf(z[i] * SQRT1_2))


@njit(cache=True, nogil=True)
def newsvendor_cost_block(x, mu, sigma, unit, hold, sell, out, lo, hi):
    """Per-product expected cost under Gaussian demand.

    out[j] = unit*x + hold*E[(x-xi)+] + sell*E[(xi-x)+] via the standard
    partial-expectation identities with standardized z = (x-mu)/sigma.
    """
    for j in range(lo, hi):
        zj = (x[j] - mu[j]) / sigma[j]
        pdf = INV_SQRT_TAU * math.exp(-0.5 * zj * zj)
        cdf = 0.5 * (1.0 + math.erf(zj * SQRT1_2))
        over = sigma[j] * (zj * cdf + pdf)
        under = sigma[j] * (pdf - zj * (1.0 - cdf))
        out[j] = unit[j] * x[j] + hold[j] * over + sell[j] * under


@njit(cache=True, nogil=True)
def bfgs_rank2_block(h, s, u, coef_su, coef_ss, r0, r1):
    """h += coef_su * (s u^T + u s^T) + coef_ss * s s^T over rows [r0, r1).

    Single fused pass; elementwise, so any row split is bit-identical.
    The association order below makes the increment bitwise symmetric
    (products commute exactly), so a symmetric h stays exactly symmetric.
    """
    n = h.shape[1]
    for i in range(r0, r1):
        si = s[i]
        ui = u[i]
        for j in range(n):
            h[i, j] += (
                coef_su * (si * u[j]) + coef_su * (ui * s[j]) + coef_ss * (si * s[j])
            )
    return None


@njit(cache=True, nogil=True)
def ecdf_count_block(samples, x, out, r0, r1):
    """out[j] = number of samples[j, :] <= x[j], rows sorted ascending."""
    s = samples.shape[1]
    for j in range(r0, r1):
        xj = x[j]
        lo = 0
        hi = s
        while lo < hi:
            mid = (lo + hi) >> 1
            if samples[j, mid] <= xj:
                lo = mid + 1
            else:
                hi = mid
        out[j] = lo


def warmup():
    """Force-compile every kernel (first call pays the JIT cost)."""
    x = np.arange(8, dtype=np.float64)
    a = np.arange(20, dtype=np.float64).reshape(5, 4)
    p = np.empty(2)
    dot_partials(x, x, 4, p, 0, 2)
    fold_pairwise(p.copy(), 2)
    sum_partials(x, 4, p, 0, 2)
    out5 = np.empty(5)
    matvec_rows(a, x[:4], out5, 4, 0, 5)
    out4 = np.empty(4)
    matvec_t_cols(a, x[:5], out4, 4, 0, 4)
    sigmoid_block(x, out4.repeat(2), 0, 8)
    exp_block(x, x.copy(), 0, 8)
    boxmuller_block(np.full(8, 0.5), np.empty(8), 0, 8)
    logistic_loss_block(x, np.zeros(8), np.empty(8), 0, 8)
    normal_cdf_block(x, np.empty(8), 0, 8)
    one = np.ones(4)
    newsvendor_cost_block(one, one, one, one, one, one, np.empty(4), 0, 4)
    ecdf_count_block(a, x[:5], np.empty(5, np.int64), 0, 5)
    bfgs_rank2_block(np.eye(3), np.ones(3), np.ones(3), -1.0, 2.0, 0, 3)
