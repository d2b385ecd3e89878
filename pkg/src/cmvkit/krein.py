"""Finite-window diagnostics for measures whose support has finitely many limit points.

For points ``w_1 .. w_N`` on the circle, ``p_N(z) = prod (z - w_i)`` and the
banded operator ``q_N`` (``C*^k p_N(C)`` for ``N = 2k``, ``C_o* C*^k p_N(C)``
for ``N = 2k + 1``) is ``(2N+1)``-diagonal; ``p_N(C)`` is compact exactly when
its ``N + 1`` lower diagonals tend to zero.  Everything here works on finite
truncations, so limits are reported as tail suprema over a declared window
together with a fitted power-law decay exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import BandMatrix, build_C, theta_factor_C
from .errors import UsageError
from .opuc import rho
from .spectral import angular_distance, spectrum_finite

UNIMODULAR_TOL = 1e-12
VERDICT_FACTOR = 10.0
DECAY_EXPONENT_MAX = -0.25
NEGLIGIBLE = 1e-12


def _unimodular(points):
    w = np.atleast_1d(np.asarray(points, dtype=complex))
    if w.size == 0:
        raise UsageError("at least one limit point is needed")
    if np.any(np.abs(np.abs(w) - 1.0) > UNIMODULAR_TOL):
        raise UsageError("limit points must lie on the unit circle")
    return w


@dataclass
class QOperator:
    """Truncated ``q_N`` with its trustworthy index range.

    ``interior`` is the 0-based half-open row range ``[2N, M - 2N)``; rows
    outside it see the truncation boundary and are excluded from diagnostics.
    """

    matrix: BandMatrix
    points: np.ndarray
    interior: tuple

    @property
    def N(self):
        return self.points.size

    def block(self):
        """Dense interior block ``q[I, I]``."""
        i0, i1 = self.interior
        return self.matrix.to_dense()[i0:i1, i0:i1]

    def diagonal(self, m):
        """``q_{n+m, n}`` (1-based ``n``) for interior ``n`` with ``n + m`` interior."""
        i0, i1 = self.interior
        m = int(m)
        d = self.matrix.diagonal(-m)
        if m >= 0:
            cols = np.arange(i0, i1 - m)
            return cols + 1, d[cols]
        # above the diagonal the band is stored by row, q_{j, j - m} at position j
        cols = np.arange(i0 - m, i1)
        return cols + 1, d[cols + m]

    def band_excess(self):
        """Largest interior entry outside the ``2N+1`` central diagonals."""
        i0, i1 = self.interior
        worst = 0.0
        for k, v in self.matrix.bands.items():
            if abs(k) > self.N:
                worst = max(worst, float(np.max(np.abs(v[i0:i1]), initial=0.0)))
        return worst

    def symmetry_residual(self):
        """``||q* - prod(conj w) q||`` (even ``N``) or ``||q* - conj(q)||`` (odd ``N``) on the interior block."""
        Q = self.block()
        if self.N % 2 == 0:
            other = np.prod(np.conj(self.points)) * Q
        else:
            other = np.conj(Q)
        return float(np.max(np.abs(Q.conj().T - other), initial=0.0))


def build_qN(seq, points, M):
    """The operator ``q_N`` at truncation order ``M`` via banded products."""
    w = _unimodular(points)
    N = w.size
    M = int(M) if not seq.is_finite else seq.order if M is None else int(M)
    if M < 4 * N:
        raise UsageError(f"truncation M = {M} is too small for N = {N} points (need M >= {4 * N})")
    C = build_C(seq, M)
    Ch = C.H
    P = BandMatrix.identity(M)
    for wi in w:
        P = P @ C.shift(wi)
    k = N // 2
    for _ in range(k):
        P = Ch @ P
    if N % 2:
        Co, _ = theta_factor_C(seq, M)
        P = Co.H @ P
    return QOperator(P, w, (2 * N, M - 2 * N))


# condition lists -----------------------------------------------------------------


def _condition_table(a, r, points, n):
    """Magnitudes of every applicable limit expression at 1-based indices ``n``.

    ``a[k]`` and ``r[k]`` hold ``a_k`` and ``rho_k`` (index 0 unused).
    """
    w = points
    N = w.size
    A = lambda j: a[n + j]  # noqa: E731
    R = lambda j: r[n + j]  # noqa: E731
    cA = lambda j: np.conj(a[n + j])  # noqa: E731
    out = {}
    if N == 1:
        (al,) = w
        out["exact-1: conj(a_n) a_{n+1} + alpha"] = cA(0) * A(1) + al
    elif N == 2:
        al, be = w
        out["exact-2a: rho_n rho_{n+1}"] = R(0) * R(1)
        out["exact-2b: rho_{n+1} (conj(a_n) a_{n+2} - alpha beta)"] = R(1) * (cA(0) * A(2) - al * be)
        out["exact-2c: conj(a_n) a_{n+1} + alpha beta a_n conj(a_{n+1}) + alpha + beta"] = (
            cA(0) * A(1) + al * be * A(0) * cA(1) + al + be
        )
        out["implied-2: rho_{n+1} (conj(a_n) a_{n+1} + conj(a_{n+1}) a_{n+2} + alpha + beta)"] = R(1) * (
            cA(0) * A(1) + cA(1) * A(2) + al + be
        )
    elif N == 3:
        al, be, ga = w
        abg = al * be * ga
        s1 = al + be + ga
        s2 = al * be + be * ga + ga * al
        out["exact-3a: rho_n rho_{n+1} rho_{n+2}"] = R(0) * R(1) * R(2)
        out["exact-3b: rho_{n+1} rho_{n+2} (conj(a_n) a_{n+3} + alpha beta gamma)"] = R(1) * R(2) * (
            cA(0) * A(3) + abg
        )
        out["exact-3c: rho_{n+1} (conj(a_n) a_{n+1} + conj(a_{n+1}) a_{n+2} - abg a_n conj(a_{n+2}) + s1)"] = R(
            1
        ) * (cA(0) * A(1) + cA(1) * A(2) - abg * A(0) * cA(2) + s1)
        out["exact-3d: conj(a_n) a_{n+1}^2 - rho_{n+1}^2 a_{n+2} + abg (a_n^2 conj(a_{n+1}) - a_{n-1} rho_n^2) + s2 a_n + s1 a_{n+1}"] = (
            cA(0) * A(1) ** 2
            - R(1) ** 2 * A(2)
            + abg * (A(0) ** 2 * cA(1) - A(-1) * R(0) ** 2)
            + s2 * A(0)
            + s1 * A(1)
        )
        out["implied-3: rho_{n+1} rho_{n+2} (sum_{j<3} conj(a_{n+j}) a_{n+j+1} + s1)"] = R(1) * R(2) * (
            cA(0) * A(1) + cA(1) * A(2) + cA(2) * A(3) + s1
        )
    # families valid for every N
    Pn = (-1) ** N * np.prod(w)
    S = np.sum(w)
    prod_N = np.prod([R(i) for i in range(1, N + 1)], axis=0)
    out[f"rho-product: prod_{{i<={N}}} rho_{{n+i}}"] = prod_N
    if N >= 2:
        prod_N1 = np.prod([R(i) for i in range(1, N)], axis=0)
        prod_N2 = np.prod([R(i) for i in range(1, N - 1)], axis=0) if N > 2 else np.ones(n.size)
        pair = lambda j: cA(j - 1) * A(j)  # noqa: E731
        out["end-pair: (conj(a_n) a_{n+N} - P) prod rho"] = (cA(0) * A(N) - Pn) * prod_N1
        out["pair-sum: (sum_{j<=N} conj(a_{n+j-1}) a_{n+j} + S) prod rho"] = (
            sum(pair(j) for j in range(1, N + 1)) + S
        ) * prod_N1
        out["wrapped-pair-sum: (sum_{j<N} conj(a_{n+j-1}) a_{n+j} + P a_n conj(a_{n+N-1}) + S) prod rho"] = (
            sum(pair(j) for j in range(1, N)) + Pn * A(0) * cA(N - 1) + S
        ) * prod_N2
    return {k: np.abs(v) for k, v in out.items()}


def fit_decay(n, values):
    """Least-squares slope of ``log value`` against ``log n`` (``-inf`` if all values vanish)."""
    n = np.asarray(n, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 1e-300
    if keep.sum() < 2:
        return -np.inf, 0.0
    slope, intercept = np.polyfit(np.log(n[keep]), np.log(v[keep]), 1)
    return float(slope), float(intercept)


@dataclass
class KreinReport:
    points: np.ndarray
    n: np.ndarray
    condition_values: dict
    tail_start: int
    tail_sup: dict = field(default_factory=dict)
    exponent: dict = field(default_factory=dict)
    satisfied: dict = field(default_factory=dict)
    verdict: str = ""

    @property
    def N(self):
        return self.points.size

    def to_json(self):
        return {
            "points": [[float(w.real), float(w.imag)] for w in self.points],
            "window": [int(self.n[0]), int(self.n[-1])],
            "tail_start": int(self.tail_start),
            "conditions": [
                {
                    "name": name,
                    "tail_sup": self.tail_sup[name],
                    "decay_exponent": self.exponent[name],
                    "satisfied": self.satisfied[name],
                }
                for name in self.condition_values
            ],
            "verdict": self.verdict,
        }

    def rows(self):
        """Per-``n`` table: header row then ``(n, value_1, value_2, ...)``."""
        names = list(self.condition_values)
        yield ["n"] + names
        for i, n in enumerate(self.n):
            yield [int(n)] + [float(self.condition_values[k][i]) for k in names]


def krein_conditions(seq, points, window):
    """Evaluate the limit-point conditions for ``points`` over ``window = (n0, n1)``.

    For one to three points the exact condition lists are evaluated (they
    characterize the derived set); for every ``N`` the four necessary
    families with ``P = (-1)^N prod w`` and ``S = sum w`` are added.  A
    condition counts as satisfied on the window when its tail supremum over
    the second half of the window is below ``10x`` the fitted power-law value
    at ``n1`` and the fitted exponent is at most ``-0.25``, or when the tail is
    negligible (``<= 1e-12``).
    """
    w = _unimodular(points)
    N = w.size
    n0, n1 = (int(x) for x in window)
    if n0 < 2 or n1 < n0 + 3:
        raise UsageError("window must satisfy 2 <= n0 and n1 >= n0 + 3")
    if seq.is_finite and n1 + N + 1 > seq.order - 1:
        raise UsageError("window reaches past the interior of the finite sequence")
    a = np.concatenate([[1.0], seq.coefficients(n1 + N + 1)])
    r = rho(a)
    n = np.arange(n0, n1 + 1)
    table = _condition_table(a, r, w, n)
    tail_start = (n0 + n1) // 2
    tail = n >= tail_start
    rep = KreinReport(w, n, table, tail_start)
    for name, v in table.items():
        sup = float(np.max(v[tail]))
        slope, icpt = fit_decay(n, v)
        extrap = np.exp(icpt) * n1**slope if np.isfinite(slope) else 0.0
        ok = sup <= NEGLIGIBLE or (slope <= DECAY_EXPONENT_MAX and sup < VERDICT_FACTOR * extrap)
        rep.tail_sup[name] = sup
        rep.exponent[name] = slope
        rep.satisfied[name] = bool(ok)
    all_ok = all(rep.satisfied.values())
    if N <= 3:
        rep.verdict = (
            "consistent with derived set within the given points"
            if all_ok
            else "not consistent with derived set within the given points"
        )
    else:
        rep.verdict = "necessary conditions consistent" if all_ok else "necessary conditions violated"
    return rep


# spectra of truncations -----------------------------------------------------------


@dataclass
class LimitPointSummary:
    M: int
    candidates: np.ndarray
    eps: tuple
    fraction_near: dict
    outside_count: dict
    eigenvalues: np.ndarray


def limit_point_experiment(seq, M, candidates=(1.0,), eps=(0.1, 0.02)):
    """Accumulation of the size-``M`` truncation spectrum near candidate limit points.

    The truncation uses the automatic terminal ``a_M/|a_M|`` (1 if ``a_M = 0``).
    For each ``epsilon`` and candidate the fraction of eigenvalues within
    angular distance ``epsilon`` is reported, together with the number of
    eigenvalues outside all ``epsilon``-arcs.
    """
    M = int(M)
    if M < 100:
        raise UsageError("limit_point_experiment needs M >= 100")
    cand = _unimodular(candidates)
    truncated = spectrum_finite(seq.truncate(M, terminal="auto"))
    lam = truncated.points
    d = angular_distance(lam[:, None], cand[None, :])
    frac = {}
    outside = {}
    for e in eps:
        near = d < e
        frac[e] = [float(x) for x in near.mean(axis=0)]
        outside[e] = int(np.sum(~near.any(axis=1)))
    return LimitPointSummary(M, cand, tuple(eps), frac, outside, lam)
