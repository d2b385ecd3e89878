"""Spectra of finite truncations: roots of the para-orthogonal polynomial,
masses, eigenvectors in the OP and OLP bases, and Szegő quadrature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .bands import build_C, build_H
from .errors import ConvergenceError, DomainError, UsageError
from .opuc import SchurSeq, blaschke_phase, laurent_from_op, masses, normalized_op, psi_and_derivative

SEED_ROTATION = 0.37
MAX_SWEEPS = 200
STEP_TOL = 1e-15
STALL_LEVEL = 1e-8
ROOT_RESIDUAL_TOL = 1e-10
TIE_TOL = 1e-10
MASS_SUM_TOL = 1e-10
EIGVEC_TOL = 1e-8


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms on the unit circle, sorted by argument in ``[0, 2 pi)``."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex))
        w = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pts.shape != w.shape:
            raise UsageError("points and masses must have the same length")
        if np.any(np.abs(np.abs(pts) - 1.0) > 1e-10):
            raise DomainError("atoms must lie on the unit circle")
        if np.any(w <= 0):
            raise DomainError("masses must be positive")
        if abs(w.sum() - 1.0) > MASS_SUM_TOL:
            raise DomainError(f"masses sum to {w.sum():.15g}, not 1")
        order = np.argsort(angles(pts), kind="stable")
        pts, w = pts[order], w[order]
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", w)

    def __len__(self):
        return self.points.size

    @property
    def angles(self):
        return angles(self.points)

    def integrate(self, f):
        """``sum_k m_k f(z_k)`` for a vectorized ``f``."""
        return np.sum(self.masses * np.asarray(f(self.points)))

    def moment(self, k):
        """``int z^k dmu``."""
        return self.integrate(lambda z: z ** int(k))

    def atoms(self):
        return list(zip(self.points.tolist(), self.masses.tolist()))


def angles(z):
    """Arguments of ``z`` mapped into ``[0, 2 pi)``."""
    return np.mod(np.angle(z), 2 * np.pi)


def angular_distance(z, w):
    return np.abs(np.angle(np.asarray(z) / np.asarray(w)))


# root finding -----------------------------------------------------------------


def seeds(n):
    """``n`` equispaced points on the circle rotated by ``exp(0.37 i)``."""
    return np.exp(1j * (SEED_ROTATION + 2 * np.pi * np.arange(n) / n))


def aberth(newton_ratio, n, start=None, max_sweeps=MAX_SWEEPS, tol=STEP_TOL):
    """Aberth-Ehrlich simultaneous iteration for the ``n`` roots of a degree-``n`` function.

    ``newton_ratio(z)`` returns ``f(z) / f'(z)`` at an array of points.  A
    root is frozen once its correction drops below ``tol`` (relative) or, in
    the rounding-noise regime below ``STALL_LEVEL``, stops halving.  Returns
    ``(roots, sweeps)``; raises :class:`ConvergenceError` if some root is still
    moving after ``max_sweeps``.
    """
    z = seeds(n) if start is None else np.array(start, dtype=complex)
    active = np.ones(n, dtype=bool)
    prev = np.full(n, np.inf)
    for sweep in range(1, max_sweeps + 1):
        idx = np.flatnonzero(active)
        ratio = newton_ratio(z[idx])
        diff = z[idx, None] - z[None, :]
        diff[np.arange(idx.size), idx] = 1.0
        repel = np.sum(1.0 / diff, axis=1) - 1.0
        denom = 1.0 - ratio * repel
        step = np.where(np.abs(denom) > 0, ratio / denom, ratio)
        step = np.where(np.isfinite(step), step, 0.0)
        z[idx] -= step
        size = np.abs(step)
        scale = np.maximum(1.0, np.abs(z[idx]))
        stalled = (size < STALL_LEVEL * scale) & (size > 0.5 * prev[idx])
        done = (size <= tol * scale) | stalled
        prev[idx] = size
        active[idx[done]] = False
        if not active.any():
            return z, sweep
    worst = float(np.max(np.abs(newton_ratio(z))))
    raise ConvergenceError(
        f"Aberth iteration did not converge in {max_sweeps} sweeps (largest Newton step {worst:.2e})",
        residual=worst,
    )


def _polish(z, newton_ratio, steps=2):
    for _ in range(steps):
        step = newton_ratio(z)
        z = z - np.where(np.isfinite(step), step, 0.0)
        z = z / np.abs(z)
    return z


def find_roots_on_circle(psi):
    """Roots of a monic polynomial whose roots all lie on the unit circle.

    ``psi`` holds ascending coefficients (``psi[k]`` multiplies ``z**k``) with
    ``psi[-1] == 1``.  Roots are projected to the circle after Newton
    polishing and returned sorted by argument in ``[0, 2 pi)``.
    """
    c = np.asarray(psi, dtype=complex)
    n = c.size - 1
    if n < 1:
        raise UsageError("psi must have degree at least 1")
    if abs(c[-1] - 1.0) > 1e-12:
        raise UsageError("psi must be monic")
    dc = P.polyder(c)

    def ratio(z):
        return P.polyval(z, c) / P.polyval(z, dc)

    roots, _ = aberth(ratio, n)
    roots = _polish(roots / np.abs(roots), ratio)
    res = np.abs(P.polyval(roots, c))
    limit = ROOT_RESIDUAL_TOL * np.max(np.abs(c))
    if np.max(res) > limit:
        raise ConvergenceError(
            f"root residual {np.max(res):.2e} exceeds {limit:.2e}", residual=float(np.max(res))
        )
    return _sorted(roots)


def _sorted(roots):
    roots = roots[np.argsort(angles(roots), kind="stable")]
    if roots.size > 1:
        gaps = np.diff(np.concatenate([angles(roots), [angles(roots[:1])[0] + 2 * np.pi]]))
        if np.min(gaps) < TIE_TOL:
            warnings.warn(
                "two computed eigenvalues coincide to 1e-10; the input may be reducible",
                RuntimeWarning,
                stacklevel=3,
            )
    return roots


def psi_roots(seq, max_iter=MAX_SWEEPS):
    """Roots of ``psi`` for a finite sequence, sorted by argument.

    ``psi(z) = 0`` on the circle exactly where the lifted phase ``F`` of
    ``z phi_{N-1}/phi*_{N-1}`` (see :func:`blaschke_phase`) hits
    ``arg(-u) + 2 pi j``.  ``F`` is strictly increasing and winds ``N`` times,
    so every root owns a bracket in ``[0, 2 pi)`` and a vectorized safeguarded
    Newton iteration finds all of them, however tightly they cluster.
    """
    if not seq.is_finite:
        raise UsageError("psi_roots needs a finite sequence")
    N = seq.order
    u = seq.terminal
    if N == 1:
        return np.array([-u])
    F0, _ = blaschke_phase(seq, np.array([0.0]))
    target0 = F0[0] + np.mod(np.angle(-u) - F0[0], 2 * np.pi)
    targets = target0 + 2 * np.pi * np.arange(N)
    lo = np.zeros(N)
    hi = np.full(N, 2 * np.pi)
    th = (np.arange(N) + 0.5) * (2 * np.pi / N)
    for _ in range(max_iter):
        F, dF = blaschke_phase(seq, th)
        g = F - targets
        lo = np.where(g <= 0, th, lo)
        hi = np.where(g > 0, th, hi)
        new = th - g / dF
        outside = ~((new > lo) & (new < hi))
        new = np.where(outside, 0.5 * (lo + hi), new)
        step = np.abs(new - th)
        th = new
        if np.all((step <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(th))) | (hi - lo <= 1e-15)):
            break
    else:
        raise ConvergenceError(
            f"phase iteration did not converge in {max_iter} steps (largest step {np.max(step):.2e})",
            residual=float(np.max(step)),
        )
    def ratio(z):
        p, dp, _ = psi_and_derivative(seq, z)
        return p / dp

    roots = _polish(np.exp(1j * th), ratio, steps=1)

    # The Newton step |psi/psi'| estimates the distance to the nearest root; near
    # eigenvalues with localized eigenvectors psi itself varies too fast to serve.
    res = np.abs(ratio(roots))
    if not np.all(res <= ROOT_RESIDUAL_TOL):
        raise ConvergenceError(
            f"worst Newton correction |psi/psi'| = {np.nanmax(res):.2e}", residual=float(np.nanmax(res))
        )
    return _sorted(roots)


def polish_eigenvalue(seq, z0, max_iter=50):
    """Newton iteration on ``psi`` along the circle, started at ``z0``.

    Returns ``(root, newton_step)``: the limit point and the final correction
    ``|psi/psi'|``, which bounds its distance to a true root.  The iteration
    converges to a nearby root of ``psi``; which one is not guaranteed when
    ``z0`` is far from every root.
    """
    if not seq.is_finite:
        raise UsageError("polish_eigenvalue needs a finite sequence")
    z = np.array([complex(z0)])
    if z[0] == 0:
        raise DomainError("starting point must be nonzero")
    z = z / np.abs(z)
    step = np.inf
    for _ in range(max_iter):
        p, dp, _ = psi_and_derivative(seq, z)
        ratio = p / dp
        if not np.isfinite(ratio[0]):
            raise ConvergenceError(f"psi' vanishes near {complex(z[0])!r}", residual=np.inf)
        z = z - ratio
        z = z / np.abs(z)
        step = float(abs(ratio[0]))
        if step <= 4 * np.finfo(float).eps:
            break
    if step > ROOT_RESIDUAL_TOL:
        raise ConvergenceError(f"Newton polish stopped with step {step:.2e}", residual=step)
    return complex(z[0]), step


def spectrum_finite(seq):
    """The spectral measure of a finite sequence: roots of ``psi`` and their masses."""
    if not isinstance(seq, SchurSeq) or not seq.is_finite:
        raise UsageError("spectrum_finite needs a finite SchurSeq")
    pts = psi_roots(seq)
    w = masses(seq, pts)
    return DiscreteMeasure(pts, w)


def szego_quadrature(seq, N, terminal):
    """Szegő quadrature of order ``N``: the spectrum of ``(a_1, ..., a_{N-1}, u)``."""
    if seq.is_finite:
        raise UsageError("szego_quadrature truncates an infinite sequence")
    u = complex(terminal)
    if abs(abs(u) - 1.0) > 1e-14:
        raise DomainError(f"terminal {u!r} is not unimodular", index=int(N))
    return spectrum_finite(seq.truncate(N, terminal=u))


# eigenvectors ---------------------------------------------------------------------


def _check_eigvec(M, v, lam, kind):
    r = np.linalg.norm(M @ v - lam * v)
    if r > EIGVEC_TOL * np.linalg.norm(v):
        raise DomainError(
            f"{lam!r} is not an eigenvalue of {kind}: residual {r / np.linalg.norm(v):.2e}"
        )
    return v


def _op_values(seq, lam):
    if not seq.is_finite:
        raise UsageError("eigenvectors are certified for finite sequences only")
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-8:
        raise DomainError(f"{lam!r} is not on the unit circle")
    ph, ps, m = normalized_op(seq, np.array([lam]))
    s = 1.0 / np.sqrt(m[0])
    return lam, ph[:, 0] * s, ps[:, 0] * s


def eigvec_H(seq, lam):
    """``(conj phi_0(lam), ..., conj phi_{N-1}(lam))``, an eigenvector of ``H(a_N)``."""
    lam, phi, _ = _op_values(seq, lam)
    v = np.conj(phi)
    return _check_eigvec(build_H(seq), v, lam, "H")


def eigvec_C(seq, lam):
    """``(conj chi_0(lam), ..., conj chi_{N-1}(lam))``, an eigenvector of ``C(a_N)``."""
    lam, phi, phs = _op_values(seq, lam)
    v = np.conj(laurent_from_op(phi, phs, lam))
    return _check_eigvec(build_C(seq), v, lam, "C")
