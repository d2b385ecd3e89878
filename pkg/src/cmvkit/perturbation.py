"""Motion of mass points under smooth perturbations of the Schur parameters.

A perturbation is a :class:`ParamPath` ``a_n(t) = r_n(t) exp(i alpha_n(t))``
with analytic derivative rules.  The angular velocity of a mass point
``lambda(t) = exp(i theta(t))`` is given by the Hellmann-Feynman type sums of
:func:`theta_velocity_finite` and :func:`theta_velocity_infinite`; tracks are
integrated with :func:`track_mass_point`, and :func:`fixed_point_curve` builds
one-parameter families along which a chosen mass point does not move.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, DomainError, TrackingError, UsageError
from .opuc import SchurSeq, decaying_op, eval_op, normalized_op, op_series, psi_and_derivative, rho
from .spectral import angular_distance, psi_roots

FD_STEP = 1e-4
FD_TOL = 1e-6
EIGEN_TOL = 1e-8
DRIFT_LIMIT = 1e-6
ISOLATION_LIMIT = 1e-6
DEGENERATE_TOL = 1e-12
RK_TOL = 1e-8
# clipped ranges stop this far inside |r| < 1 so rounding cannot push a parameter onto the circle
MODULUS_MARGIN = 1e-12

IndexRule = Callable[[float, np.ndarray], np.ndarray]
ScalarRule = Callable[[float], float]


def _indices(n):
    return np.arange(1, int(n) + 1)


# parameter paths ------------------------------------------------------------


def _derivative_mismatch(f, d, t, h):
    """Index of the first entry of ``d`` inconsistent with central differences of ``f``.

    An entry passes when the difference quotient with step ``h`` is within
    ``FD_TOL`` (relative to ``1 + |d|``), or when the errors at ``h, h/2, h/4``
    shrink at least three-fold per halving, as a correct derivative gives for
    steep but smooth rules.  Returns ``None`` when every entry passes.
    """
    errs = []
    for step in (h, h / 2, h / 4):
        fd = (f(t + step) - f(t - step)) / (2 * step)
        errs.append(np.abs(fd - d))
    small = errs[0] <= FD_TOL * (1.0 + np.abs(d))
    floor = 1e-9 * (1.0 + np.abs(d))
    second_order = ((errs[1] <= errs[0] / 3) | (errs[1] <= floor)) & ((errs[2] <= errs[1] / 3) | (errs[2] <= floor))
    bad = np.flatnonzero(~(small | second_order))
    return int(bad[0]) if bad.size else None


@dataclass
class ParamPath:
    """A differentiable family of Schur parameters on ``interval``.

    ``r(t, idx)`` and ``alpha(t, idx)`` give modulus and argument of ``a_n(t)``
    for an array of 1-based indices; ``dr`` and ``dalpha`` are their exact
    t-derivatives.  A finite path of order ``N`` also carries the terminal
    argument ``beta(t)`` (``a_N(t) = exp(i beta(t))``) with derivative
    ``dbeta``.  Moduli may be negative; only ``|r_n| < 1`` is required.

    At construction the derivative rules are compared with central
    differences of the value rules at a few points of the interval.
    """

    r: IndexRule
    alpha: IndexRule
    dr: IndexRule
    dalpha: IndexRule
    interval: tuple = (-1.0, 1.0)
    order: Optional[int] = None
    beta: Optional[ScalarRule] = None
    dbeta: Optional[ScalarRule] = None
    check_terms: int = 32
    name: str = "path"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = (float(x) for x in self.interval)
        if not lo < hi:
            raise UsageError(f"empty path interval [{lo}, {hi}]")
        self.interval = (lo, hi)
        if self.order is not None:
            self.order = int(self.order)
            if self.order < 1:
                raise UsageError("path order must be at least 1")
            if self.beta is None or self.dbeta is None:
                raise UsageError("a finite path needs terminal rules beta and dbeta")
        self.self_check()

    @property
    def is_finite(self):
        return self.order is not None

    def _count(self, n_terms=None):
        if self.is_finite:
            return self.order - 1
        if n_terms is None:
            raise UsageError("an infinite path needs an explicit number of terms")
        return int(n_terms)

    def components(self, t, n_terms=None):
        """``(r, alpha, dr, dalpha)`` at ``t`` for indices ``1 .. N-1`` (or ``1 .. n_terms``)."""
        idx = _indices(self._count(n_terms))
        t = float(t)
        out = []
        for rule in (self.r, self.alpha, self.dr, self.dalpha):
            out.append(np.asarray(rule(t, idx), dtype=float) * np.ones(idx.size))
        return tuple(out)

    def self_check(self, samples=5):
        """Verify ``|r_n| < 1`` and the derivative rules to second order in the step."""
        lo, hi = self.interval
        h = min(FD_STEP, 0.25 * (hi - lo))
        n = self.order - 1 if self.is_finite else self.check_terms
        idx = _indices(n)
        for t in np.linspace(lo + h, hi - h, samples):
            t = float(t)
            r = np.asarray(self.r(t, idx), dtype=float) * np.ones(idx.size)
            bad = np.flatnonzero(~(np.abs(r) < 1.0))
            if bad.size:
                k = int(bad[0]) + 1
                raise DomainError(f"|r_{k}({t:.6g})| = {abs(r[bad[0]]):.6g} is not below 1", index=k)
            pairs = [(self.r, self.dr, "r"), (self.alpha, self.dalpha, "alpha")]
            for value, deriv, label in pairs:
                d = np.asarray(deriv(t, idx), dtype=float) * np.ones(idx.size)
                k = _derivative_mismatch(lambda s: np.asarray(value(s, idx), dtype=float), d, t, h)
                if k is not None:
                    raise DomainError(
                        f"d{label}_{k + 1} disagrees with the difference quotients at t = {t:.6g}",
                        index=k + 1,
                    )
            if self.is_finite:
                d = np.array([float(self.dbeta(t))])
                if _derivative_mismatch(lambda s: np.array([float(self.beta(s))]), d, t, h) is not None:
                    raise DomainError(
                        f"dbeta disagrees with the difference quotients at t = {t:.6g}", index=self.order
                    )

    def at(self, t, n_terms=None):
        """The Schur sequence at parameter ``t``."""
        t = float(t)
        if self.is_finite:
            r, al, _, _ = self.components(t)
            return SchurSeq.finite(r * np.exp(1j * al), np.exp(1j * float(self.beta(t))), name=self.name)
        r_rule, a_rule = self.r, self.alpha
        return SchurSeq.infinite(
            lambda idx: np.asarray(r_rule(t, idx)) * np.exp(1j * np.asarray(a_rule(t, idx))),
            name=self.name,
        )

    def truncate(self, N):
        """Finite path of order ``N`` with terminal ``a_N(t)/|a_N(t)|`` (``1`` if ``a_N(t) = 0``)."""
        if self.is_finite:
            raise UsageError("path is already finite")
        N = int(N)
        last = np.array([N])

        def beta(t):
            r = float(np.asarray(self.r(t, last)).ravel()[0])
            if r == 0.0:
                return 0.0
            a = float(np.asarray(self.alpha(t, last)).ravel()[0])
            return a if r > 0 else a + math.pi

        def dbeta(t):
            r = float(np.asarray(self.r(t, last)).ravel()[0])
            if r == 0.0:
                return 0.0
            return float(np.asarray(self.dalpha(t, last)).ravel()[0])

        return ParamPath(self.r, self.alpha, self.dr, self.dalpha, self.interval, order=N,
                         beta=beta, dbeta=dbeta, name=self.name, meta=dict(self.meta))

    # constructors -----------------------------------------------------------

    @classmethod
    def frozen(cls, seq, interval=(-1.0, 1.0)):
        """Constant path through ``seq``."""
        return cls.linear(seq, 0.0, 0.0, 0.0, interval=interval, name="frozen")

    @classmethod
    def uniform_rotation(cls, seq, rate=1.0, interval=(-1.0, 1.0)):
        """``a_n(t) = a_n exp(i rate t)`` for every ``n`` (terminal included)."""
        return cls.linear(seq, 0.0, rate, rate, interval=interval, name="uniform-rotation")

    @classmethod
    def linear(cls, seq, dr, dalpha, dbeta=0.0, interval=(-1.0, 1.0), name="linear"):
        """``r_n(t) = |a_n| + dr_n t`` and ``alpha_n(t) = arg a_n + dalpha_n t``.

        ``dr`` and ``dalpha`` broadcast against the interior parameters; for an
        infinite ``seq`` they must be scalars.
        """
        if seq.is_finite:
            a = seq.interior()
            r0, a0 = np.abs(a), np.angle(a)
            vr = np.broadcast_to(np.asarray(dr, dtype=float), a.shape).copy()
            va = np.broadcast_to(np.asarray(dalpha, dtype=float), a.shape).copy()
            b0, vb = float(np.angle(seq.terminal)), float(dbeta)
            return cls(
                lambda t, idx: r0[idx - 1] + vr[idx - 1] * t,
                lambda t, idx: a0[idx - 1] + va[idx - 1] * t,
                lambda t, idx: vr[idx - 1],
                lambda t, idx: va[idx - 1],
                interval,
                order=seq.order,
                beta=lambda t: b0 + vb * t,
                dbeta=lambda t: vb,
                name=name,
            )
        if np.ndim(dr) or np.ndim(dalpha):
            raise UsageError("an infinite path takes scalar rates")
        vr, va = float(dr), float(dalpha)

        def coeff(idx):
            return seq.coefficients(int(np.max(idx)))[idx - 1]

        return cls(
            lambda t, idx: np.abs(coeff(idx)) + vr * t,
            lambda t, idx: np.angle(coeff(idx)) + va * t,
            lambda t, idx: np.full(idx.shape, vr),
            lambda t, idx: np.full(idx.shape, va),
            interval,
            name=name,
        )


# Hellmann-Feynman quantities ------------------------------------------------------


def _gamma_delta_terms(r, alpha, phi, lam):
    """``Gamma_n`` and ``Delta_n`` for ``n = 1 .. len(r)`` from ``phi_0 .. phi_len(r)``.

    ``alpha`` is the argument attached to the (possibly negative) modulus
    ``r``.  ``phi`` may be rescaled by a common positive factor ``s``; both
    outputs then scale by ``s^2``.
    """
    n = np.arange(1, r.size + 1)
    prev = phi[:-1]
    gamma = (2.0 / rho(r) ** 2) * np.imag(np.exp(-1j * alpha) * lam ** (2 - n) * prev ** 2)
    delta = np.abs(prev) ** 2 - np.abs(phi[1:]) ** 2
    return gamma, delta


def gamma_delta(seq, lam, n):
    """``(Gamma_n, Delta_n)`` at ``lam`` on the unit circle.

    ``Gamma_n = (2/rho_n^2) Im(exp(-i alpha_n) lam^(2-n) phi_{n-1}(lam)^2)`` and
    ``Delta_n = |phi_{n-1}(lam)|^2 - |phi_n(lam)|^2``, where ``alpha_n`` is the
    argument of ``a_n`` (zero when ``a_n = 0``).  ``n`` may be an integer or an
    array of indices; for a finite sequence ``n < N``.

    The values come from the forward recurrence, except at a mass point of
    an infinite sequence whose series converges before the largest index:
    there ``phi_n`` decays while rounding excites the growing solution, so
    :func:`decaying_op` supplies the values instead.
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise DomainError(f"{lam!r} is not on the unit circle")
    ns = np.atleast_1d(np.asarray(n, dtype=int))
    if ns.size == 0 or np.min(ns) < 1:
        raise UsageError("indices start at 1")
    top = int(np.max(ns))
    if seq.is_finite and top >= seq.order:
        raise UsageError(f"Gamma_n needs n < N = {seq.order}")
    phi = None
    if not seq.is_finite:
        est = op_series(seq, lam, max(top + 1, 64))[2]
        if est.converged and est.n_used <= top:
            phi, _ = decaying_op(seq, lam, top)
    if phi is None:
        phi, _ = eval_op(seq, lam, top)
    a = seq.coefficients(top)
    g, d = _gamma_delta_terms(np.abs(a), np.angle(a), phi, lam)
    if np.ndim(n) == 0:
        return float(g[ns[0] - 1]), float(d[ns[0] - 1])
    return g[ns - 1], d[ns - 1]


def _require_eigenvalue(seq, lam):
    p, dp, _ = psi_and_derivative(seq, np.array([lam]))
    step = abs(p[0] / dp[0]) if dp[0] != 0 else np.inf
    if not step <= EIGEN_TOL:
        raise DomainError(f"{lam!r} is not an eigenvalue at this t (Newton distance {step:.2e})")


def theta_velocity_finite(path, t, lam, N=None):
    """Angular velocity ``theta'(t)`` of the mass point ``lam`` of a finite path.

    ``theta' = mu({lam}) [sum_{n<N} (r_n' Gamma_n + alpha_n' Delta_n) + beta' |phi_{N-1}|^2]``,
    evaluated with the normalized values ``sqrt(mu) phi_n`` so that no factor
    overflows.  An infinite path is first truncated at ``N`` (see
    :meth:`ParamPath.truncate`).
    """
    if not path.is_finite:
        if N is None:
            raise UsageError("an infinite path needs a truncation order N")
        path = path.truncate(N)
    elif N is not None and int(N) != path.order:
        raise UsageError(f"path has order {path.order}, not {N}")
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-8:
        raise DomainError(f"{lam!r} is not on the unit circle")
    lam = lam / abs(lam)
    seq = path.at(t)
    _require_eigenvalue(seq, lam)
    return _velocity(path, seq, t, lam)


def _velocity(path, seq, t, lam):
    phi_hat, _, _ = normalized_op(seq, np.array([lam]))
    phi_hat = phi_hat[:, 0]
    r, al, dr, da = path.components(t)
    g, d = _gamma_delta_terms(r, al, phi_hat, lam)
    total = np.sum(dr * g + da * d) + float(path.dbeta(t)) * abs(phi_hat[-1]) ** 2
    return float(total)


@dataclass(frozen=True)
class VelocityEstimate:
    """Partial sum of the infinite velocity series with a bound on the omitted tail."""

    value: float
    tail_bound: float
    mass: float
    n_used: int


def theta_velocity_infinite(path, t, lam, n_terms):
    """Velocity series ``mu({lam}) sum_n (r_n' Gamma_n + alpha_n' Delta_n)`` of an infinite path.

    The sum is taken over the terms where the OP series at ``lam`` has not yet
    converged (see :func:`op_series`).  Past index ``m`` the summands are
    bounded by ``(2 sup|r'|/(1 - r^2) + sup|alpha_n' - alpha_{n-1}'|) |phi_n|^2``
    plus the boundary term ``|alpha_{m+1}'| |phi_m|^2``, with suprema over the
    first ``n_terms`` indices; ``tail_bound`` multiplies these by the mass and
    the extrapolated tail of ``sum |phi_n|^2``.  Raises :class:`ConvergenceError`
    when the mass itself has not converged.
    """
    if path.is_finite:
        raise UsageError("use theta_velocity_finite for a finite path")
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise DomainError(f"{lam!r} is not on the unit circle")
    seq = path.at(t)
    phi, _, est = op_series(seq, lam, n_terms)
    if not est.converged:
        raise ConvergenceError(
            f"mass at {lam!r} is not converged after {n_terms} terms ({est.message})",
            residual=est.relative_tail,
        )
    m = est.n_used - 1
    r, al, dr, da = path.components(t, int(n_terms))
    mu = est.mass
    phi_hat = phi * math.sqrt(mu)
    g, d = _gamma_delta_terms(r[:m], al[:m], phi_hat, lam)
    value = float(np.sum(dr[:m] * g + da[:m] * d))
    moving = dr[m:] != 0
    rmax = float(np.max(np.abs(r[m:][moving]))) if np.any(moving) else 0.0
    r_term = 2.0 * float(np.max(np.abs(dr[m:]), initial=0.0)) / (1.0 - rmax ** 2)
    a_term = float(np.max(np.abs(np.diff(da[m - 1 :])), initial=0.0)) if m >= 1 else 0.0
    boundary = abs(da[m]) * abs(phi_hat[-1]) ** 2 if m < da.size else 0.0
    tail = (r_term + a_term) * est.relative_tail + boundary
    return VelocityEstimate(value, float(tail), mu, est.n_used)


def velocity_bound(path, t, n_terms=None):
    """``(2/(1 - r^2)) sup|r_n'| + sup|alpha_n' - alpha_{n-1}'|`` with ``alpha_0' = 0``.

    ``r`` is the largest ``|r_n(t)|`` among indices with ``r_n'(t) != 0``.  For
    a finite path the second supremum runs to ``N`` with ``alpha_N = beta``;
    for an infinite path both suprema run over the first ``n_terms`` indices.
    """
    r, _, dr, da = path.components(t, n_terms)
    moving = dr != 0
    r_term = 0.0
    if np.any(moving):
        rmax = float(np.max(np.abs(r[moving])))
        r_term = 2.0 * float(np.max(np.abs(dr))) / (1.0 - rmax ** 2)
    rates = np.concatenate([[0.0], da])
    if path.is_finite:
        rates = np.append(rates, float(path.dbeta(t)))
    return r_term + float(np.max(np.abs(np.diff(rates)), initial=0.0))


# tracking ------------------------------------------------------------------------------


@dataclass
class MassPointTrack:
    """Samples ``(t, theta, mass)`` of a followed mass point.

    ``method`` is ``"formula-ode"`` (integrated velocity, re-anchored to the
    spectrum after every step) or ``"eigen-follow"`` (nearest eigenvalue at
    each sample).  ``max_drift`` is the largest angular gap seen between the
    integrated angle and the nearest eigenvalue before re-anchoring.
    """

    samples: list
    method: str
    max_drift: float = 0.0
    velocity: list = field(default_factory=list)

    @property
    def t(self):
        return np.array([s[0] for s in self.samples])

    @property
    def theta(self):
        return np.array([s[1] for s in self.samples])

    @property
    def mass(self):
        return np.array([s[2] for s in self.samples])

    def rows(self):
        """``(t, theta, mass, theta')`` per sample, ``theta'`` from the velocity formula."""
        return [
            (float(t), float(th), float(m), float(v))
            for (t, th, m), v in zip(self.samples, self.velocity)
        ]


def _snap(seq, theta, steps=3):
    """Newton-polish ``exp(i theta)`` towards the nearest root of ``psi``."""
    z = np.array([np.exp(1j * theta)])
    for _ in range(steps):
        p, dp, _ = psi_and_derivative(seq, z)
        step = p / dp
        if not np.isfinite(step[0]):
            break
        z = z - step
        z = z / np.abs(z)
    return theta + float(np.angle(z[0] * np.exp(-1j * theta)))


def _anchor(seq, theta):
    """Nearest eigenvalue angle (lifted near ``theta``), its mass, drift and isolation gap."""
    roots = psi_roots(seq)
    dist = angular_distance(roots, np.exp(1j * theta))
    k = int(np.argmin(dist))
    lifted = theta + float(np.angle(roots[k] * np.exp(-1j * theta)))
    others = np.delete(dist, k)
    gap = float(np.min(angular_distance(np.delete(roots, k), roots[k]))) if others.size else np.inf
    _, _, m = normalized_op(seq, roots[k : k + 1])
    return lifted, float(m[0]), float(dist[k]), gap


def _checked_anchor(seq, theta, t, isolation=ISOLATION_LIMIT):
    lifted, mass, drift, gap = _anchor(seq, theta)
    if gap < isolation:
        raise TrackingError(f"isolation lost at t = {t:.6g}: another eigenvalue within {gap:.2e}")
    return lifted, mass, drift


def track_mass_point(path, t_span, theta0, N=None, method="formula-ode", tol=RK_TOL,
                     samples=21, max_steps=10000, drift_limit=DRIFT_LIMIT, isolation=ISOLATION_LIMIT):
    """Follow the mass point starting at ``exp(i theta0)`` along ``path``.

    ``"formula-ode"`` integrates ``theta'`` from :func:`theta_velocity_finite`
    with classical fourth-order Runge-Kutta steps, choosing the step by step
    doubling so the local error stays below ``tol``.  After every accepted
    step the angle is compared with the nearest eigenvalue of the section at
    that ``t`` and moved onto it; a gap above ``drift_limit`` raises
    :class:`TrackingError`, as does another eigenvalue coming within
    ``isolation`` of the tracked one.
    ``"eigen-follow"`` records the nearest eigenvalue at ``samples`` equispaced
    values of ``t``.  Infinite paths are truncated at ``N``.
    """
    if not path.is_finite:
        if N is None:
            raise UsageError("an infinite path needs a truncation order N")
        path = path.truncate(N)
    t0, t1 = (float(x) for x in t_span)
    lo, hi = path.interval
    if not (lo <= min(t0, t1) and max(t0, t1) <= hi):
        raise UsageError(f"t_span [{t0}, {t1}] leaves the path interval [{lo}, {hi}]")
    seq = path.at(t0)
    theta, mass, drift = _checked_anchor(seq, float(theta0), t0, isolation)
    if drift > drift_limit:
        raise DomainError(f"exp(i {theta0!r}) is not an eigenvalue at t = {t0} (distance {drift:.2e})")
    out = [(t0, theta, mass)]
    vel = [_velocity(path, seq, t0, complex(np.exp(1j * theta)))]

    if method == "eigen-follow":
        for t in np.linspace(t0, t1, int(samples))[1:]:
            seq = path.at(t)
            theta, mass, _ = _checked_anchor(seq, theta, float(t), isolation)
            out.append((float(t), theta, mass))
            vel.append(_velocity(path, seq, float(t), complex(np.exp(1j * theta))))
        return MassPointTrack(out, method, 0.0, vel)
    if method != "formula-ode":
        raise UsageError(f"unknown tracking method {method!r}")

    def rhs(t, th):
        seq = path.at(t)
        th = _snap(seq, th)
        return _velocity(path, seq, t, complex(np.exp(1j * th)))

    def rk4(t, th, h):
        k1 = rhs(t, th)
        k2 = rhs(t + h / 2, th + h * k1 / 2)
        k3 = rhs(t + h / 2, th + h * k2 / 2)
        k4 = rhs(t + h, th + h * k3)
        return th + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6

    span = t1 - t0
    if span == 0:
        return MassPointTrack(out, method, 0.0, vel)
    h = span / 16
    t = t0
    worst = 0.0
    for _ in range(max_steps):
        if (t1 - t) * np.sign(span) <= 0:
            return MassPointTrack(out, method, worst, vel)
        if abs(h) > abs(t1 - t):
            h = t1 - t
        full = rk4(t, theta, h)
        half = rk4(t + h / 2, rk4(t, theta, h / 2), h / 2)
        err = abs(half - full) / 15.0
        if err <= tol or abs(h) <= 1e-12 * abs(span):
            if err > tol:
                raise TrackingError(f"step size underflow at t = {t:.6g} (local error {err:.2e})")
            t = t + h
            guess = half + (half - full) / 15.0
            seq = path.at(t)
            theta, mass, drift = _checked_anchor(seq, guess, t, isolation)
            worst = max(worst, drift)
            if drift > drift_limit:
                raise TrackingError(f"velocity formula drifted {drift:.2e} from the spectrum at t = {t:.6g}")
            out.append((t, theta, mass))
            vel.append(_velocity(path, seq, t, complex(np.exp(1j * theta))))
        factor = 4.0 if err == 0 else min(4.0, max(0.1, 0.9 * (tol / err) ** 0.2))
        h *= factor
    raise TrackingError(f"no completion within {max_steps} steps")


# fixed-mass-point curves -------------------------------------------------------------


def _coefficient(seq, n):
    if seq.is_finite and n >= seq.order:
        raise UsageError(f"the perturbed index n must be below N = {seq.order}")
    return complex(seq.coefficients(n)[n - 1])


@dataclass(frozen=True)
class FixedPointCurve:
    """Relation ``r(alpha)`` keeping ``lam = exp(i theta)`` a mass point.

    ``case`` selects which parameters move with ``alpha``:

    1. only ``a_n = r exp(i alpha)``;
    2. ``a_n = r exp(i alpha)`` and every later parameter (terminal included)
       rotated by ``exp(i(alpha - alpha_n))``;
    3. ``a_n = r exp(i alpha_n)`` and every later parameter rotated by
       ``exp(i alpha)``.

    ``xi`` is the phase of ``phi_{n-1}(lam)^2``, ``shift = (n-2) theta - xi`` and
    ``c`` the integration constant fixing ``r = r_n`` at the base point
    (``alpha = alpha_n`` for cases 1 and 2, ``alpha = 0`` for case 3).
    """

    case: int
    n: int
    theta: float
    xi: float
    c: float
    r_n: float
    alpha_n: float
    base: SchurSeq

    @property
    def shift(self):
        return (self.n - 2) * self.theta - self.xi

    @property
    def base_alpha(self):
        return 0.0 if self.case == 3 else self.alpha_n

    def _parts(self, alpha):
        al = np.asarray(alpha, dtype=float)
        if self.case == 1:
            p = al + self.shift
            return np.sin(self.c) * np.ones_like(al), np.sin(p - self.c)
        if self.case == 2:
            p = al + self.shift
            return np.sin(0.5 * (p - self.c)), np.sin(0.5 * (p + self.c))
        p = self.alpha_n + self.shift
        return -np.sin(0.5 * al + p - self.c), np.sin(0.5 * al - self.c)

    def r(self, alpha):
        num, den = self._parts(alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            return num / den

    def dr(self, alpha):
        """Exact derivative ``dr/dalpha``."""
        al = np.asarray(alpha, dtype=float)
        _, den = self._parts(al)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.case == 1:
                p = al + self.shift
                return -np.sin(self.c) * np.cos(p - self.c) / den ** 2
            if self.case == 2:
                return 0.5 * np.sin(self.c) / den ** 2
            return 0.5 * np.sin(self.alpha_n + self.shift) / den ** 2

    def valid(self, alpha):
        """``|r| < 1`` without crossing a pole of ``r`` since the base point."""
        _, den = self._parts(alpha)
        _, den0 = self._parts(self.base_alpha)
        return (np.abs(self.r(alpha)) < 1.0 - MODULUS_MARGIN) & (np.sign(den) == np.sign(den0))

    def valid_range(self, lo, hi, grid=4001):
        """The part of ``[lo, hi]`` connected to the base point on which :meth:`valid` holds.

        Returns ``(lo', hi', clipped)``.  The base point must lie in ``[lo, hi]``.
        """
        b = self.base_alpha
        if not lo <= b <= hi:
            raise UsageError(f"range [{lo}, {hi}] does not contain the base point {b:.6g}")
        return _connected_range(self.valid, b, lo, hi, grid)

    def parameters(self, alpha):
        """Schur parameters on the curve at ``alpha`` (a :class:`SchurSeq`)."""
        alpha = float(alpha)
        r = float(self.r(alpha))
        if not abs(r) < 1.0:
            raise DomainError(f"|r({alpha:.6g})| = {abs(r):.6g} is not below 1", index=self.n)
        if self.case == 1:
            an, rot = r * np.exp(1j * alpha), 1.0
        elif self.case == 2:
            an, rot = r * np.exp(1j * alpha), np.exp(1j * (alpha - self.alpha_n))
        else:
            an, rot = r * np.exp(1j * self.alpha_n), np.exp(1j * alpha)
        return _splice(self.base, self.n, an, rot)

    def sample(self, lo, hi, count=20):
        """``count`` equispaced ``(alpha, r)`` pairs, clipping ``[lo, hi]`` to the valid range."""
        a0, a1, clipped = self.valid_range(lo, hi)
        if clipped:
            warnings.warn(
                f"|r| reaches 1 inside [{lo:.6g}, {hi:.6g}]; range clipped to [{a0:.6g}, {a1:.6g}]",
                RuntimeWarning,
                stacklevel=2,
            )
        alphas = np.linspace(a0, a1, int(count))
        return alphas, self.r(alphas)

    def path(self, interval=None):
        """The curve as a :class:`ParamPath` with ``alpha = base_alpha + t``."""
        b = self.base_alpha
        if interval is None:
            interval = (-0.1, 0.1)
        lo, hi, _ = self.valid_range(b + interval[0], b + interval[1])
        return _curve_path(self, (lo - b, hi - b))


def _edge(valid, good, bad, steps=60):
    """Bisect between a valid point ``good`` and an invalid point ``bad``."""
    for _ in range(steps):
        mid = 0.5 * (good + bad)
        if bool(valid(np.array([mid]))[0]):
            good = mid
        else:
            bad = mid
    return good


def _connected_range(valid, base, lo, hi, grid):
    if not bool(valid(np.array([base]))[0]):
        raise DomainError("the base point itself is not valid")
    xs = np.linspace(lo, hi, int(grid))
    ok = valid(xs)
    right = xs[xs > base]
    bad = right[~ok[xs > base]]
    a1, clipped = hi, False
    if bad.size:
        good = right[right < bad[0]]
        a1 = _edge(valid, good[-1] if good.size else base, bad[0])
        clipped = True
    left = xs[xs < base][::-1]
    bad = left[~ok[xs < base][::-1]]
    a0 = lo
    if bad.size:
        good = left[left > bad[0]]
        a0 = _edge(valid, good[-1] if good.size else base, bad[0])
        clipped = True
    return float(a0), float(a1), clipped


def _splice(base, n, an, rot):
    """``base`` with ``a_n`` replaced and every later parameter multiplied by ``rot``."""
    if base.is_finite:
        a = base.interior().copy()
        a[n - 1] = an
        a[n:] = a[n:] * rot
        return SchurSeq.finite(a, base.terminal * rot, name=base.name)
    head = base.coefficients(n).copy()
    head[n - 1] = an

    def rule(idx):
        return base.coefficients(int(np.max(idx)))[idx - 1] * rot

    return SchurSeq.infinite(rule, prefix=head, name=base.name)


def _curve_path(curve, interval):
    base, n, case = curve.base, curve.n, curve.case
    count = base.order - 1 if base.is_finite else None
    b = curve.base_alpha

    def coeffs(idx):
        top = int(np.max(idx))
        return base.coefficients(top)[idx - 1]

    def r_rule(t, idx):
        a = coeffs(idx)
        out = np.abs(a).astype(float)
        out[idx == n] = curve.r(b + t)
        return out

    def a_rule(t, idx):
        out = np.angle(coeffs(idx)).astype(float)
        if case in (1, 2):
            out[idx == n] = b + t
        else:
            out[idx == n] = curve.alpha_n
        if case in (2, 3):
            out[idx > n] += t
        return out

    def dr_rule(t, idx):
        out = np.zeros(idx.size)
        out[idx == n] = curve.dr(b + t)
        return out

    def da_rule(t, idx):
        out = np.zeros(idx.size)
        if case in (1, 2):
            out[idx == n] = 1.0
        if case in (2, 3):
            out[idx > n] = 1.0
        return out

    kwargs = {}
    if count is not None:
        b0 = float(np.angle(base.terminal))
        move = 0.0 if case == 1 else 1.0
        kwargs = dict(order=base.order, beta=lambda t: b0 + move * t, dbeta=lambda t: move)
    return ParamPath(r_rule, a_rule, dr_rule, da_rule, interval, name=f"fixed-curve-{case}", **kwargs)


def fixed_point_curve(case, seq, n, lam):
    """The curve of :class:`FixedPointCurve` through the base parameters of ``seq``.

    With ``psi = alpha_n + (n-2) theta - xi`` at the base point the constants are

    * case 1: ``c = atan2(r_n sin psi, 1 + r_n cos psi)``;
    * case 2: ``c = 2 atan2((1 - r_n) sin(psi/2), (1 + r_n) cos(psi/2))``;
    * case 3: ``c = atan2(sin psi, r_n + cos psi)``.

    The two-argument arctangent puts ``c`` on the branch for which the curve
    passes through ``r = r_n``.  ``lam`` must be a mass point of ``seq`` (for a
    finite sequence a root of ``psi``) with ``phi_{n-1}(lam) != 0``.
    """
    case = int(case)
    if case not in (1, 2, 3):
        raise UsageError(f"case must be 1, 2 or 3, not {case}")
    n = int(n)
    if n < 1:
        raise UsageError("the perturbed index n starts at 1")
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-8:
        raise DomainError(f"{lam!r} is not on the unit circle")
    lam = lam / abs(lam)
    if seq.is_finite:
        _require_eigenvalue(seq, lam)
    an = _coefficient(seq, n)
    phi, _ = eval_op(seq, lam, n - 1)
    p = complex(phi[n - 1])
    if abs(p) < DEGENERATE_TOL:
        raise DomainError(f"phi_{n - 1} vanishes at {lam!r}; the phase xi is undefined", index=n)
    theta = float(np.angle(lam))
    xi = float(np.angle(p * p))
    r_n, alpha_n = abs(an), float(np.angle(an))
    psi = alpha_n + (n - 2) * theta - xi
    if case == 1:
        c = math.atan2(r_n * math.sin(psi), 1.0 + r_n * math.cos(psi))
    elif case == 2:
        c = 2.0 * math.atan2((1.0 - r_n) * math.sin(psi / 2), (1.0 + r_n) * math.cos(psi / 2))
    else:
        c = math.atan2(math.sin(psi), r_n + math.cos(psi))
    curve = FixedPointCurve(case, n, theta, xi, c, r_n, alpha_n, seq)
    _, den = curve._parts(curve.base_alpha)
    if abs(float(den)) < DEGENERATE_TOL:
        raise DomainError("the base point sits on a pole of the curve (sin psi = 0)", index=n)
    return curve


# Geronimus families --------------------------------------------------------------------


def _geronimus_factor(a, case, t):
    """Numerator and denominator of the modulus factor of ``a_n(t)``, and the rotation of ``a``."""
    x, y, s = a.real, a.imag, abs(a) ** 2
    if case == 1:
        return y, y * math.cos(t) - (s - x) * math.sin(t), np.exp(1j * t)
    half_c, half_s = math.cos(t / 2), math.sin(t / 2)
    num = y * half_c + (1 - x) * half_s
    if case == 2:
        return num, y * half_c - (s - x) * half_s, np.exp(1j * t)
    return num, y * half_c + (s - x) * half_s, 1.0


def geronimus_nth(a, case, t):
    """The perturbed ``a_n(t)`` of the Geronimus family ``case`` (independent of ``n``)."""
    a = complex(a)
    num, den, rot = _geronimus_factor(a, case, float(t))
    return num / den * rot * a


def geronimus_valid_range(a, case, lo, hi, grid=4001):
    """Range of ``t`` around 0 inside ``[lo, hi]`` with ``|a_n(t)| < 1`` and no pole crossed."""
    a = complex(a)
    _, d0, _ = _geronimus_factor(a, case, 0.0)

    def valid(ts):
        out = []
        for t in np.atleast_1d(ts):
            num, den, _ = _geronimus_factor(a, case, float(t))
            out.append(np.sign(den) == np.sign(d0) and abs(num / den * a) < 1.0 - MODULUS_MARGIN)
        return np.array(out)

    return _connected_range(valid, 0.0, lo, hi, grid)


def geronimus_families(a, case, n, t):
    """Perturbation of the constant sequence ``a`` keeping the mass point ``(1-a)/(1-conj a)``.

    Case 1 changes only ``a_n``; cases 2 and 3 also rotate every later
    parameter by ``exp(i t)``.  ``t`` outside the range where ``|a_n(t)| < 1``
    is clipped to it with a warning.
    """
    a = complex(a)
    case, n = int(case), int(n)
    if case not in (1, 2, 3):
        raise UsageError(f"case must be 1, 2 or 3, not {case}")
    if n < 1:
        raise UsageError("the perturbed index n starts at 1")
    if not abs(a) < 1 or a.imag == 0:
        raise DomainError(f"a = {a!r} must lie in the open disk off the real axis")
    if not a.real < abs(a) ** 2:
        raise DomainError(f"a = {a!r} has no isolated mass point (Re a >= |a|^2)")
    t = float(t)
    span = max(1.0, 2 * abs(t))
    lo, hi, _ = geronimus_valid_range(a, case, -span, span)
    if not lo <= t <= hi:
        clipped = min(max(t, lo), hi)
        warnings.warn(f"t = {t:.6g} leaves the validity range; clipped to {clipped:.6g}", RuntimeWarning,
                      stacklevel=2)
        t = clipped
    an = geronimus_nth(a, case, t)
    rot = 1.0 if case == 1 else np.exp(1j * t)
    prefix = np.append(np.full(n - 1, a), an)
    return SchurSeq.infinite(
        lambda idx: np.full(np.shape(idx), a * rot), prefix=prefix, name=f"geronimus-case-{case}",
        a=a, case=case, n=n, t=t,
    )
