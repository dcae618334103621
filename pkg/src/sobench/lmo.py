"""Linear minimization oracles for the two constrained tasks.

Three tiers: an analytic oracle for the simplex-with-slack set, an
analytic oracle for a single budget constraint (the benchmark default, so
the product count can grow large), and a dense simplex LP for small
multi-constraint instances. Ties are always broken toward the lowest
index so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import as_matrix, as_vector
from .errors import DimensionMismatch, InvalidConstraint, InvalidGradient, SolverStall


@dataclass
class SimplexSlackSet:
    """{w : sum(w) <= 1, w >= 0}."""

    dimension: int


@dataclass
class PolytopeSet:
    """{s : A s <= C, s >= 0} with strictly positive A and C.

    Positivity guarantees the origin is feasible and the set is bounded.
    """

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A)
        self.C = as_vector(self.C)
        if self.A.shape[0] != self.C.size:
            raise DimensionMismatch("constraint rows != len(C)")
        if not np.all(self.A > 0):
            raise InvalidConstraint("technology matrix entries must be strictly positive")
        if not np.all(self.C > 0):
            raise InvalidConstraint("budget levels must be strictly positive")

    @property
    def n_resources(self) -> int:
        return self.A.shape[0]

    @property
    def n_products(self) -> int:
        return self.A.shape[1]


def lmo_simplex_slack(g) -> np.ndarray:
    """argmin over the simplex-with-slack of s.g: a basis vector or zero."""
    g = as_vector(g)
    if np.isnan(g).any():
        raise InvalidGradient("gradient contains NaN")
    s = np.zeros(g.size)
    j = int(np.argmin(g))  # first minimum: lowest index on ties
    if g[j] < 0.0:
        s[j] = 1.0
    return s


def lmo_single_budget(g, c, budget: float) -> np.ndarray:
    """argmin of s.g over {c.s <= budget, s >= 0} for a single resource row.

    Vertices are the origin and the per-product full-budget points
    (budget/c_j) e_j, so the oracle is a scan.
    """
    g = as_vector(g)
    c = as_vector(c)
    if g.size != c.size:
        raise DimensionMismatch("gradient and cost lengths differ")
    if np.isnan(g).any():
        raise InvalidGradient("gradient contains NaN")
    if not np.all(c > 0):
        raise InvalidConstraint("resource costs must be strictly positive")
    if not budget > 0:
        raise InvalidConstraint("budget must be strictly positive")
    vals = g * (budget / c)
    j = int(np.argmin(vals))
    s = np.zeros(g.size)
    if g[j] < 0.0:
        s[j] = budget / c[j]
    return s


def lmo_general(g, polytope: PolytopeSet, max_iters: int | None = None) -> np.ndarray:
    """argmin of s.g over {A s <= C, s >= 0} by primal simplex.

    The slack basis is feasible (C > 0), so the solve starts there; Bland's
    rule (lowest-index entering and leaving) prevents cycling. Intended
    for small instances (N <= 1e4, M <= 64).
    """
    g = as_vector(g)
    a = polytope.A
    c = polytope.C
    m, n = a.shape
    if g.size != n:
        raise DimensionMismatch(f"gradient length {g.size} != products {n}")
    if np.isnan(g).any():
        raise InvalidGradient("gradient contains NaN")
    cap = max_iters if max_iters is not None else 10 * (n + m)

    # tableau rows: [A | I | rhs]; cost row holds reduced costs
    tab = np.zeros((m, n + m + 1))
    tab[:, :n] = a
    tab[:, n : n + m] = np.eye(m)
    tab[:, -1] = c
    cost = np.zeros(n + m)
    cost[:n] = g
    basis = list(range(n, n + m))

    scale = 1.0 + float(np.max(np.abs(g)))
    enter_tol = 1e-12 * scale
    pivot_tol = 1e-12

    for _ in range(cap):
        entering = -1
        for j in range(n + m):
            if cost[j] < -enter_tol:
                entering = j
                break
        if entering < 0:
            break
        col = tab[:, entering]
        best_ratio = np.inf
        leave_row = -1
        for i in range(m):
            if col[i] > pivot_tol:
                ratio = tab[i, -1] / col[i]
                if ratio < best_ratio - 1e-15 or (
                    abs(ratio - best_ratio) <= 1e-15
                    and (leave_row < 0 or basis[i] < basis[leave_row])
                ):
                    best_ratio = ratio
                    leave_row = i
        if leave_row < 0:
            raise SolverStall("LP unbounded; polytope invariants violated")
        piv = tab[leave_row, entering]
        tab[leave_row] /= piv
        for i in range(m):
            if i != leave_row and tab[i, entering] != 0.0:
                tab[i] -= tab[i, entering] * tab[leave_row]
        cost_coeff = cost[entering]
        if cost_coeff != 0.0:
            cost -= cost_coeff * tab[leave_row, :-1]
        basis[leave_row] = entering
    else:
        raise SolverStall(f"simplex exceeded {cap} iterations")

    s = np.zeros(n)
    for i, b in enumerate(basis):
        if b < n:
            s[b] = tab[i, -1]
    return s
