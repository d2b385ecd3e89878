"""Schur parameters, the Szegő recurrence and orthogonal (Laurent) polynomials.

Conventions
-----------
Schur parameters are indexed from 1, ``a_1, a_2, ...``; arrays returned by
:meth:`SchurSeq.coefficients` hold ``a_1 .. a_n`` at positions ``0 .. n-1``.
The recurrence is

    rho_n phi_n(z)  = z phi_{n-1}(z) + a_n phi*_{n-1}(z)
    rho_n phi*_n(z) = conj(a_n) z phi_{n-1}(z) + phi*_{n-1}(z)

with ``phi_0 = phi*_0 = 1`` and ``rho_n = sqrt(1 - |a_n|^2)``.  Polynomial
coefficient vectors are stored in ascending order (``c[k]`` multiplies
``z**k``), as in :mod:`numpy.polynomial`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UsageError

TERMINAL_TOL = 1e-14
MASS_REL_TAIL = 1e-8
DOUBLE_ROOT_TOL = 1e-10

Rule = Callable[[np.ndarray], np.ndarray]


def rho(a):
    """Complementary parameter ``sqrt(1 - |a|^2)``, free of cancellation near ``|a| = 1``."""
    m = np.abs(a)
    return np.sqrt(np.maximum((1.0 - m) * (1.0 + m), 0.0))


def _check_interior(values, offset=0):
    bad = np.flatnonzero(~(np.abs(values) < 1.0))
    if bad.size:
        k = int(bad[0]) + offset + 1
        raise DomainError(
            f"Schur parameter a_{k} = {complex(values[bad[0]])!r} is not in the open unit disk",
            index=k,
        )


@dataclass(frozen=True, eq=False)
class SchurSeq:
    """A finite or infinite sequence of Schur parameters.

    A *finite* sequence ``(a_1, ..., a_{N-1}, a_N)`` has interior values in the
    open disk and a unimodular ``terminal`` ``a_N``; it describes a measure
    supported on ``N`` points.  An *infinite* sequence is an explicit prefix
    followed by a vectorized ``rule`` mapping 1-based indices to values (zero
    tail when ``rule`` is ``None``).  Every call site that needs a finite
    section passes its truncation index explicitly.
    """

    prefix: np.ndarray
    terminal: Optional[complex] = None
    rule: Optional[Rule] = None
    name: str = "list"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        prefix = np.atleast_1d(np.asarray(self.prefix, dtype=complex)).copy()
        if prefix.ndim != 1:
            raise UsageError("Schur parameters must be a one-dimensional sequence")
        _check_interior(prefix)
        prefix.setflags(write=False)
        object.__setattr__(self, "prefix", prefix)
        if self.terminal is not None:
            u = complex(self.terminal)
            if abs(abs(u) - 1.0) > TERMINAL_TOL:
                raise DomainError(
                    f"terminal parameter a_{prefix.size + 1} = {u!r} is not unimodular",
                    index=prefix.size + 1,
                )
            if self.rule is not None:
                raise UsageError("a finite sequence cannot carry a generator rule")
            object.__setattr__(self, "terminal", u)

    # construction -----------------------------------------------------

    @classmethod
    def finite(cls, interior, terminal, name="list"):
        return cls(np.asarray(interior, dtype=complex), terminal=terminal, name=name)

    @classmethod
    def infinite(cls, rule=None, prefix=(), name="list", **params):
        return cls(np.asarray(prefix, dtype=complex), rule=rule, name=name, params=params)

    # queries ----------------------------------------------------------

    @property
    def kind(self):
        return "finite" if self.terminal is not None else "infinite"

    @property
    def is_finite(self):
        return self.terminal is not None

    @property
    def order(self):
        """``N`` for a finite sequence (number of support points)."""
        if not self.is_finite:
            raise UsageError("an infinite sequence has no order; pass a truncation index")
        return self.prefix.size + 1

    def coefficients(self, n):
        """Return ``a_1 .. a_n`` as a complex array.

        For a finite sequence ``n`` may not exceed ``N`` and position ``N - 1``
        holds the terminal parameter.
        """
        n = int(n)
        if n < 0:
            raise UsageError("negative coefficient count")
        m = self.prefix.size
        if self.is_finite:
            if n > m + 1:
                raise UsageError(f"finite sequence of order {m + 1} has no a_{n}")
            if n == m + 1:
                return np.append(self.prefix, self.terminal)
            return self.prefix[:n].copy()
        if n <= m:
            return self.prefix[:n].copy()
        idx = np.arange(m + 1, n + 1)
        if self.rule is None:
            tail = np.zeros(idx.size, dtype=complex)
        else:
            tail = np.asarray(self.rule(idx), dtype=complex) * np.ones(idx.size)
            _check_interior(tail, offset=m)
        return np.concatenate([self.prefix, tail])

    def interior(self, n=None):
        """Return the interior parameters (all of them for a finite sequence)."""
        if self.is_finite:
            return self.prefix.copy() if n is None else self.prefix[:n].copy()
        if n is None:
            raise UsageError("an infinite sequence needs an explicit count")
        return self.coefficients(n)

    def truncate(self, N, terminal="auto"):
        """Finite sequence ``(a_1, ..., a_{N-1}, u)``.

        ``terminal="auto"`` selects ``u = a_N/|a_N|`` (``u = 1`` if ``a_N = 0``).
        """
        N = int(N)
        if N < 1:
            raise UsageError("truncation order must be at least 1")
        if self.is_finite:
            if N > self.order:
                raise UsageError(f"cannot extend a finite sequence of order {self.order} to {N}")
            a = self.coefficients(N)
        else:
            a = self.coefficients(N)
        if isinstance(terminal, str):
            if terminal != "auto":
                raise UsageError(f"unknown terminal rule {terminal!r}")
            u = auto_terminal(a[-1])
        else:
            u = complex(terminal)
        return SchurSeq.finite(a[:-1], u, name=self.name)

    def __repr__(self):
        if self.is_finite:
            return f"SchurSeq(finite, N={self.order}, name={self.name!r})"
        return f"SchurSeq(infinite, prefix={self.prefix.size}, name={self.name!r})"


def auto_terminal(a_last):
    a_last = complex(a_last)
    m = abs(a_last)
    return a_last / m if m > 0 else 1.0 + 0.0j


# generator rules --------------------------------------------------------


def constant(a):
    """Geronimus sequence ``a_n = a``."""
    a = complex(a)
    return SchurSeq.infinite(lambda n: np.full(np.shape(n), a), name="constant", a=a)


def alternating_approach_one():
    """``a_n = (1 - 1/(n+1)) (-1)^n``; support accumulates only at ``z = 1``."""
    return SchurSeq.infinite(
        lambda n: (1.0 - 1.0 / (n + 1.0)) * (-1.0) ** n, name="alternating-approach-one"
    )


def two_point_example():
    """``a_n = (1 - 1/(n+1)) s_n`` with signs ``s = (+, +, -, -, +, +, ...)``.

    ``conj(a_n) a_{n+2} -> -1`` and ``conj(a_n) a_{n+1}`` stays real, so the
    support accumulates at ``z = 1`` and ``z = -1`` only.
    """
    return SchurSeq.infinite(
        lambda n: (1.0 - 1.0 / (n + 1.0)) * np.where((n - 1) % 4 < 2, 1.0, -1.0),
        name="two-point-example",
    )


def rotating(r, omega):
    """``a_n = r exp(i n omega)``."""
    r, omega = float(r), float(omega)
    return SchurSeq.infinite(
        lambda n: r * np.exp(1j * omega * n), name="rotating", r=r, omega=omega
    )


def decaying(c, q):
    """``a_n = c q^n`` with ``|q| < 1``."""
    c, q = complex(c), complex(q)
    return SchurSeq.infinite(lambda n: c * q ** n, name="decaying", c=c, q=q)


def alternating_sign(r):
    """``a_n = (-1)^n r``."""
    r = complex(r)
    return SchurSeq.infinite(lambda n: r * (-1.0) ** n, name="alternating-sign", r=r)


def random_finite(rng, N, radius=0.95):
    """Random finite sequence with interior moduli below ``radius`` (test helper)."""
    m = radius * np.sqrt(rng.uniform(0, 1, N - 1))
    ph = rng.uniform(0, 2 * np.pi, N - 1)
    u = np.exp(1j * rng.uniform(0, 2 * np.pi))
    return SchurSeq.finite(m * np.exp(1j * ph), u, name="random")


# polynomial states ------------------------------------------------------


@dataclass(frozen=True)
class PolyState:
    """Values ``phi_n(z)``, ``phi*_n(z)`` and the leading coefficient ``kappa_n``."""

    degree: int
    phi: complex
    phi_star: complex
    kappa: float
    z: complex

    @classmethod
    def initial(cls, z):
        return cls(0, 1.0 + 0j, 1.0 + 0j, 1.0, complex(z))


def advance_poly(state, a):
    """One step of the Szegő recurrence, from degree ``n-1`` to ``n``."""
    a = complex(a)
    if not abs(a) < 1.0:
        raise DomainError(
            f"Schur parameter a_{state.degree + 1} = {a!r} is not in the open unit disk",
            index=state.degree + 1,
        )
    # one-element arrays run the same ufunc loops as eval_op, so the two agree bitwise
    r = rho(np.array([a]))
    phi, phi_star = _step(np.array([state.z]), np.array([state.phi]), np.array([state.phi_star]),
                          np.array([a]), r)
    return PolyState(state.degree + 1, complex(phi[0]), complex(phi_star[0]), float(state.kappa / r[0]), state.z)


def _step(z, p, q, a, r):
    """Degree ``n-1`` to ``n`` on values; shared by the scalar and the vectorized sweeps."""
    return (z * p + a * q) / r, (np.conj(a) * z * p + q) / r


@dataclass(frozen=True)
class LaurentState:
    index: int
    chi: complex


def _coeffs_for(seq, n_max):
    if n_max < 0:
        raise UsageError("n_max must be non-negative")
    if seq.is_finite and n_max > seq.order - 1:
        raise UsageError(
            f"phi_{n_max} is undefined for a measure on {seq.order} points (max degree {seq.order - 1})"
        )
    return seq.coefficients(n_max)


def eval_op(seq, z, n_max):
    """Evaluate ``phi_n(z)`` and ``phi*_n(z)`` for ``n = 0 .. n_max``.

    ``z`` may be an array; the result arrays have shape ``(n_max + 1,) + z.shape``.
    """
    a = _coeffs_for(seq, n_max)
    return _sweep(a, np.asarray(z, dtype=complex))


def _sweep(a, z):
    phi = np.empty((a.size + 1,) + z.shape, dtype=complex)
    phs = np.empty_like(phi)
    phi[0] = 1.0
    phs[0] = 1.0
    r = rho(a)
    for k in range(a.size):
        phi[k + 1], phs[k + 1] = _step(z, phi[k], phs[k], a[k], r[k])
    return phi, phs


def kappa(seq, n_max):
    """Leading coefficients ``kappa_0 .. kappa_{n_max}``."""
    a = _coeffs_for(seq, n_max)
    return np.concatenate([[1.0], np.cumprod(1.0 / rho(a))])


def laurent_from_op(phi, phi_star, z):
    """Assemble ``chi_n`` from OP values: ``chi_2k = z^-k phi*_2k``, ``chi_2k+1 = z^-k phi_2k+1``."""
    z = np.asarray(z, dtype=complex)
    n = np.arange(phi.shape[0])
    k = (n // 2).reshape((-1,) + (1,) * z.ndim)
    zk = z ** (-k)
    even = (n % 2 == 0).reshape(k.shape)
    return np.where(even, phi_star, phi) * zk


def eval_olp(seq, z, n_max):
    """Orthogonal Laurent polynomials ``chi_0(z) .. chi_{n_max}(z)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise DomainError("Laurent polynomials are undefined at z = 0")
    phi, phs = eval_op(seq, z, n_max)
    return laurent_from_op(phi, phs, z)


# para-orthogonal polynomial ----------------------------------------------


def monic_op_coefficients(a):
    """Monic ``Phi_n`` and ``Phi*_n`` coefficient vectors after consuming ``a``."""
    p = np.array([1.0 + 0j])
    for k, ak in enumerate(np.asarray(a, dtype=complex), 1):
        if not abs(ak) < 1.0:
            raise DomainError(f"Schur parameter a_{k} is not in the open unit disk", index=k)
        ps = np.conj(p[::-1])
        p = np.concatenate([[0.0], p]) + ak * np.concatenate([ps, [0.0]])
    return p, np.conj(p[::-1])


def para_orthogonal_psi(seq):
    """Monic para-orthogonal polynomial ``psi`` of a finite sequence.

    ``kappa_{N-1} psi = z phi_{N-1} + a_N phi*_{N-1}``; computed in monic form
    ``psi = z Phi_{N-1} + a_N Phi*_{N-1}`` so that no ``kappa`` overflow occurs.
    Coefficients are returned in ascending order, ``psi[N] == 1``.
    """
    if not seq.is_finite:
        raise UsageError("para-orthogonal polynomial needs a finite sequence with a terminal parameter")
    p, ps = monic_op_coefficients(seq.interior())
    return np.concatenate([[0.0], p]) + seq.terminal * np.concatenate([ps, [0.0]])


def psi_and_derivative(seq, z):
    """Scaled values of ``psi(z)`` and ``psi'(z)`` from the recurrence.

    Returns ``(psi, dpsi, log_scale)`` with the true values equal to the
    returned ones times ``exp(log_scale)`` (up to the positive factor
    ``kappa_{N-1}``).  Evaluation runs the recurrence at the points, which
    stays accurate when the coefficient vector would be badly conditioned.
    """
    if not seq.is_finite:
        raise UsageError("psi needs a finite sequence")
    z = np.asarray(z, dtype=complex)
    a = seq.interior()
    r = rho(a)
    p = np.ones_like(z)
    q = np.ones_like(z)
    dp = np.zeros_like(z)
    dq = np.zeros_like(z)
    log_scale = np.zeros(z.shape)
    for k in range(a.size):
        ak, ck = a[k], np.conj(a[k])
        p, q, dp, dq = (
            (z * p + ak * q) / r[k],
            (ck * z * p + q) / r[k],
            (p + z * dp + ak * dq) / r[k],
            (ck * (p + z * dp) + dq) / r[k],
        )
        s = np.maximum(np.abs(p), np.abs(q))
        s = np.where(s > 0, s, 1.0)
        p, q, dp, dq = p / s, q / s, dp / s, dq / s
        log_scale += np.log(s)
    u = seq.terminal
    return z * p + u * q, p + z * dp + u * dq, log_scale


def blaschke_phase(seq, theta):
    """Continuous phase of ``z phi_{N-1}(z) / phi*_{N-1}(z)`` at ``z = exp(i theta)``.

    Returns ``(F, dF)`` with ``exp(i F) = z b_{N-1}(z)``, ``b_n = phi_n/phi*_n``.
    On the circle ``b_n = (z b_{n-1} + a_n) / (conj(a_n) z b_{n-1} + 1)``; with
    ``z b_{n-1} = exp(i eta)`` the lifted phase advances by
    ``2 arg(1 + a_n exp(-i eta))``, which stays in ``(-pi, pi)``.  ``F`` is
    therefore continuous and strictly increasing (``dF`` is a sum of Poisson
    kernels), and ``F(theta + 2 pi) = F(theta) + 2 pi N``.
    """
    if not seq.is_finite:
        raise UsageError("blaschke_phase needs a finite sequence")
    theta = np.asarray(theta, dtype=float)
    eta = theta.copy()
    deta = np.ones_like(theta)
    for ak in seq.interior():
        w = ak * np.exp(-1j * eta)
        one_w = 1.0 + w
        eta = eta + 2.0 * np.angle(one_w) + theta
        deta = deta * ((1.0 - abs(ak) ** 2) / np.abs(one_w) ** 2) + 1.0
    return eta, deta


# masses -----------------------------------------------------------------


@dataclass(frozen=True)
class MassEstimate:
    """Result of a mass computation at one point.

    ``converged`` is ``True`` for finite sequences and, for infinite ones,
    when the extrapolated tail of ``sum |phi_n|^2`` is below ``1e-8`` of the
    partial sum.  ``n_used`` is the number of terms actually summed; for an
    infinite sequence the sum stops early once the remaining tail is below
    double-precision resolution.
    """

    mass: float
    converged: bool
    n_terms: int
    n_used: int
    log_partial_sum: float
    relative_tail: float

    @property
    def message(self):
        if self.converged:
            return "converged"
        if self.mass == 0.0:
            return "mass ~ 0 (not a mass point at this truncation)"
        return f"not converged at {self.n_terms} terms"


def _forward_scaled(a, z):
    """Forward recurrence with per-step rescaling.

    Returns mantissas ``P, Q`` and ``L`` with ``phi_n = P[n] exp(L[n])`` and
    ``phi*_n = Q[n] exp(L[n])`` for ``n = 0 .. len(a)``.
    """
    shape = (a.size + 1,) + z.shape
    P = np.empty(shape, dtype=complex)
    Q = np.empty(shape, dtype=complex)
    L = np.zeros(shape)
    P[0] = 1.0
    Q[0] = 1.0
    r = rho(a)
    for k in range(a.size):
        p = (z * P[k] + a[k] * Q[k]) / r[k]
        q = (np.conj(a[k]) * z * P[k] + Q[k]) / r[k]
        s = np.maximum(np.abs(p), np.abs(q))
        s = np.where(s > 0, s, 1.0)
        P[k + 1] = p / s
        Q[k + 1] = q / s
        L[k + 1] = L[k] + np.log(s)
    return P, Q, L


def _backward_scaled(a, u, z):
    """Backward recurrence from the terminal condition ``z phi_{N-1} + u phi*_{N-1} = 0``.

    ``a`` holds the interior parameters ``a_1 .. a_{N-1}``.  The result is a
    nonzero multiple of ``(phi_n, phi*_n)``, ``n = 0 .. N-1``, whenever ``z`` is
    a root of ``psi``.
    """
    N = a.size + 1
    shape = (N,) + z.shape
    P = np.empty(shape, dtype=complex)
    Q = np.empty(shape, dtype=complex)
    L = np.zeros(shape)
    P[N - 1] = -u
    Q[N - 1] = z
    r = rho(a)
    for n in range(N - 1, 0, -1):
        an = a[n - 1]
        p = (P[n] - an * Q[n]) / (r[n - 1] * z)
        q = (-np.conj(an) * z * P[n] + z * Q[n]) / (r[n - 1] * z)
        s = np.maximum(np.abs(p), np.abs(q))
        s = np.where(s > 0, s, 1.0)
        P[n - 1] = p / s
        Q[n - 1] = q / s
        L[n - 1] = L[n] + np.log(s)
    return P, Q, L


def normalized_op(seq, points):
    """Spectral data of a finite sequence at (approximate) mass points.

    Returns ``(phi_hat, phs_hat, mass)`` with ``phi_hat[n] = sqrt(mass) phi_n``
    and ``phs_hat[n] = sqrt(mass) phi*_n`` for ``n = 0 .. N-1``, where
    ``mass = 1/sum |phi_n|^2``.

    Along an eigenvector that decays away from one end of the section the
    recurrence run towards that end amplifies roundoff, so the values are
    assembled from the forward solution ``F`` (normalized by ``phi_0 = 1``)
    and the backward solution ``B`` from the terminal condition.  Each
    transfer step has determinant ``z``, so on the circle the Wronskian
    ``|det[F_k, B_k]|`` is constant; noise in either solution therefore makes
    ``|F_k| |B_k|`` at least ``1/eps`` smaller than at the peak of the true
    eigenvector.  The splice index is the maximizer of ``|F_k| |B_k|``.
    """
    if not seq.is_finite:
        raise UsageError("normalized_op needs a finite sequence")
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    a = seq.interior()
    N = seq.order
    fP, fQ, fL = _forward_scaled(a, z)
    bP, bQ, bL = _backward_scaled(a, seq.terminal, z)
    with np.errstate(divide="ignore"):
        lf = fL + 0.5 * np.log(np.abs(fP) ** 2 + np.abs(fQ) ** 2)
        lb = bL + 0.5 * np.log(np.abs(bP) ** 2 + np.abs(bQ) ** 2)
    k = np.argmax(lf + lb, axis=0)
    cols = np.arange(z.size)
    # least-squares constant carrying B_k onto F_k (both as 2-vectors), in mantissa/log form
    Fp, Fq, Bp, Bq = fP[k, cols], fQ[k, cols], bP[k, cols], bQ[k, cols]
    c_mant = (np.conj(Bp) * Fp + np.conj(Bq) * Fq) / (np.abs(Bp) ** 2 + np.abs(Bq) ** 2)
    c_log = fL[k, cols] - bL[k, cols]
    idx = np.arange(N)[:, None]
    fwd = idx <= k[None, :]
    with np.errstate(divide="ignore"):
        lphi = np.where(
            fwd,
            fL + np.log(np.abs(fP)),
            bL + c_log + np.log(np.abs(c_mant)) + np.log(np.abs(bP)),
        )
    log_norm = np.logaddexp.reduce(2.0 * lphi, axis=0)
    mass = np.exp(-log_norm)
    half = 0.5 * log_norm
    with np.errstate(over="ignore", invalid="ignore"):
        # both branches are evaluated; the discarded one may overflow
        phi_hat = np.where(fwd, fP * np.exp(fL - half), c_mant * bP * np.exp(bL + c_log - half))
        phs_hat = np.where(fwd, fQ * np.exp(fL - half), c_mant * bQ * np.exp(bL + c_log - half))
    return phi_hat, phs_hat, mass


def _stop_index(terms, cum, min_terms=16, stop_rel=1e-13):
    """First index after which the extrapolated relative tail is negligible."""
    m = terms.size
    for n in range(min_terms, m + 1):
        w = max(8, n // 8)
        if n < w + 2:
            continue
        rel = _relative_tail(terms[n - w:n], cum[n - 1], n0=n - w)
        if rel < stop_rel:
            return n, rel
    return m, _relative_tail(terms[-max(8, m // 8):], cum[-1], n0=m - max(8, m // 8))


def _relative_tail(y, log_total, n0=0):
    """Geometric extrapolation of ``sum_{n >= n0+len(y)} exp(terms)`` relative to the total."""
    if y.size < 4:
        return np.inf
    y = np.where(np.isfinite(y), y, -745.0)
    x = np.arange(y.size, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    if slope >= 0:
        return np.inf
    q = math.exp(slope)
    if q >= 1.0:
        return np.inf
    head = max(float(y[-1]), slope * (y.size - 1) + icpt)
    return math.exp(head - log_total) * q / (1.0 - q)


def op_series(seq, lam, n_terms):
    """``phi_n(lam)`` of an infinite sequence, truncated where the series has converged.

    Returns ``(phi, phi_star, estimate)``; ``phi`` has ``estimate.n_used``
    entries.  Terms past the convergence index are not computed, since the
    forward recurrence cannot resolve a decaying solution below roundoff.
    """
    lam = complex(lam)
    a = seq.coefficients(int(n_terms) - 1)
    P, Q, L = _forward_scaled(a, np.array(lam))
    with np.errstate(divide="ignore"):
        terms = 2.0 * (L + np.log(np.abs(P)))
    cum = np.logaddexp.accumulate(terms)
    n_used, rel = _stop_index(terms, cum)
    total = float(cum[n_used - 1])
    mass = math.exp(-total) if total < 700 else 0.0
    est = MassEstimate(mass, bool(rel < MASS_REL_TAIL), int(n_terms), n_used, total, float(rel))
    scale = np.exp(L[:n_used])
    return P[:n_used] * scale, Q[:n_used] * scale, est


def decaying_op(seq, lam, n_max, pad=64):
    """``phi_0 .. phi_{n_max}`` at a mass point ``lam`` of an infinite sequence.

    At a mass point ``phi_n(lam)`` is the solution of the recurrence that
    decays, and the forward sweep loses it once it falls below roundoff of
    ``phi_0``.  Run backwards, that solution grows, so the section of order
    ``n_max + 1 + pad`` with automatic terminal is evaluated by
    :func:`normalized_op` (forward sweep spliced to a backward one) and
    rescaled to ``phi_0 = 1``.  Only meaningful where ``lam`` is a mass point.
    """
    if seq.is_finite:
        raise UsageError("decaying_op is for infinite sequences")
    lam = complex(lam)
    section = seq.truncate(int(n_max) + 1 + int(pad), terminal="auto")
    phi_hat, phs_hat, _ = normalized_op(section, np.array([lam]))
    c = phi_hat[0, 0]
    return phi_hat[: n_max + 1, 0] / c, phs_hat[: n_max + 1, 0] / c


def mass_estimate(seq, lam, n_terms=None):
    """Mass ``1 / sum_{n < n_terms} |phi_n(lam)|^2`` with a convergence verdict."""
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise DomainError(f"mass point candidate {lam!r} is not on the unit circle")
    if seq.is_finite:
        _, _, m = normalized_op(seq, np.array([lam]))
        N = seq.order
        mass = float(m[0])
        return MassEstimate(mass, True, N, N, -math.log(mass) if mass > 0 else np.inf, 0.0)
    if n_terms is None:
        raise UsageError("an infinite sequence needs n_terms")
    if int(n_terms) < 1:
        raise UsageError("n_terms must be positive")
    return op_series(seq, lam, n_terms)[2]


def mass_at(seq, lam, n_terms=None):
    """Mass of ``lam`` from the OP series; for finite sequences ``n_terms = N``."""
    return mass_estimate(seq, lam, n_terms).mass


def masses(seq, points):
    """Masses of a finite sequence at several points."""
    return normalized_op(seq, points)[2]


# Geronimus closed forms ---------------------------------------------------


def geronimus_mass_point(a):
    """Isolated mass point ``(1 - a)/(1 - conj a)`` of the constant-parameter measure.

    Returns ``None`` when ``Re(a) >= |a|^2`` (no isolated mass point).
    """
    a = complex(a)
    if a == 0:
        raise DomainError("a = 0 gives the Lebesgue measure, which has no mass point")
    if not abs(a) < 1:
        raise DomainError(f"a = {a!r} is not in the open unit disk")
    if a.real < abs(a) ** 2:
        lam = (1 - a) / (1 - a.conjugate())
        return lam / abs(lam)
    return None


def geronimus_w(a, z):
    """Roots ``w_1, w_2`` of ``w^2 - (z + 1) w + rho^2 z = 0``."""
    z = np.asarray(z, dtype=complex)
    r2 = 1.0 - abs(complex(a)) ** 2
    s = z + 1.0
    disc = np.sqrt(s * s - 4.0 * r2 * z)
    w1 = 0.5 * (s + disc)
    w2 = 0.5 * (s - disc)
    # take the larger root from the formula and the smaller one from Vieta
    swap = np.abs(w2) > np.abs(w1)
    w1, w2 = np.where(swap, w2, w1), np.where(swap, w1, w2)
    big = np.abs(w1) > 0
    w2 = np.where(big, r2 * z / np.where(big, w1, 1.0), w2)
    return w1, w2


def geronimus_u(w1, w2, n):
    """``u_n = (w1^n - w2^n)/(w1 - w2)``, with the limit ``n w^(n-1)`` at a double root."""
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    if n == 0:
        return np.zeros(np.broadcast(w1, w2).shape, dtype=complex)
    gap = np.abs(w1 - w2)
    scale = np.maximum(np.abs(w1), np.abs(w2))
    double = gap < DOUBLE_ROOT_TOL * scale
    close = ~double & (gap < 1e-3 * scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (w1 ** n - w2 ** n) / (w1 - w2)
    if np.any(close):
        k = np.arange(n).reshape((-1,) + (1,) * w1.ndim)
        geo = np.sum(w1 ** k * w2 ** (n - 1 - k), axis=0)
        out = np.where(close, geo, out)
    w = 0.5 * (w1 + w2)
    return np.where(double, n * w ** (n - 1), out)


def geronimus_phi(a, z, n):
    """``phi_n(z) = rho^-n (u_{n+1}(z) - (1 - a) u_n(z))`` for constant parameters ``a``."""
    a = complex(a)
    if not abs(a) < 1:
        raise DomainError(f"a = {a!r} is not in the open unit disk")
    n = int(n)
    w1, w2 = geronimus_w(a, z)
    r = float(rho(a))
    val = (geronimus_u(w1, w2, n + 1) - (1 - a) * geronimus_u(w1, w2, n)) / r ** n
    return val if np.ndim(val) else complex(val)
