"""Reduction of a unitary Hessenberg matrix to an equivalent five-diagonal one.

Given an irreducible unitary upper Hessenberg ``H``, the Schur parameters are
read off the first row and the subdiagonal, and the unitary ``V`` with
``H = V* C V`` is generated one column at a time from ``V H = C V``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import HessMat, ParaTriMat, build_C_ab
from .errors import ConvergenceError, DomainError, ReducibleError, UsageError
from .opuc import rho

IRREDUCIBLE_TOL = 1e-13
UNITARY_TOL = 1e-10
ORTHO_TOL = 1e-10


@dataclass
class ColumnCompressed:
    """Square matrix whose column ``j`` (1-based) is zero below row ``length(j)``.

    For the reduction similarity ``length(j) = j`` for ``j = 1, 2`` and
    ``min(2j - 2, n)`` afterwards.
    """

    n: int
    columns: list

    def to_dense(self):
        V = np.zeros((self.n, self.n), dtype=complex)
        for j, c in enumerate(self.columns):
            V[: c.size, j] = c
        return V


@dataclass
class ReductionResult:
    tau: np.ndarray
    schur: np.ndarray
    C: ParaTriMat
    V: ColumnCompressed
    similarity_residual: float
    orthogonality_residual: float

    def map_eigenvector(self, lam, y):
        """Eigenvector of ``H`` for ``lam`` from an eigenvector ``y`` of ``C``.

        ``y`` is first rotated so that ``y_1`` is real and positive; the
        correspondence conjugates the odd entries and so is only phase-covariant
        after that normalization.
        """
        y = np.asarray(y, dtype=complex)
        if abs(y[0]) == 0:
            raise DomainError("eigenvector of an irreducible C cannot vanish in its first entry")
        y = y * (abs(y[0]) / y[0])
        n = y.size
        idx = np.arange(1, n + 1)
        k = (idx + 1) // 2
        phase = self.tau / np.abs(self.tau)
        power = complex(lam) ** (1 - k)
        return np.where(idx % 2 == 1, phase * power * np.conj(y), phase * power * y)


def _as_dense_hessenberg(H):
    if isinstance(H, HessMat):
        return H.to_dense()
    A = np.asarray(H, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError("expected a square matrix")
    if np.any(np.tril(A, -2) != 0):
        raise UsageError("matrix is not upper Hessenberg")
    return A


def five_diagonal_reduce(H, strict=True):
    """Reduce a unitary irreducible Hessenberg matrix to para-tridiagonal form.

    Returns the products ``tau_n`` of the subdiagonal, the parameters
    ``a_n = -h_{1,n} / conj(tau_n)``, the matrix ``C(a_N)`` and the similarity
    ``V`` with ``H = V* C V``.  ``V`` is built without re-orthogonalization;
    its orthogonality residual is checked against ``1e-10``.  The recursion
    amplifies rounding by roughly ``prod 1/|h_{j+1,j}|``, so inputs with many
    small subdiagonal entries raise :class:`ConvergenceError` unless
    ``strict`` is false, in which case the residual is only reported.
    """
    A = _as_dense_hessenberg(H)
    n = A.shape[0]
    unit = np.max(np.abs(A.conj().T @ A - np.eye(n)))
    if unit > UNITARY_TOL:
        raise DomainError(f"Hessenberg input is not unitary (residual {unit:.2e})")
    sub = np.diagonal(A, -1)
    small = np.flatnonzero(np.abs(sub) < IRREDUCIBLE_TOL)
    if small.size:
        j = int(small[0]) + 2
        raise ReducibleError(
            f"h[{j},{j - 1}] vanishes; the matrix is reducible, split it with block_decompose first",
            index=j - 1,
        )
    tau = np.concatenate([[1.0 + 0j], np.cumprod(sub)])
    a = -A[0, :] / np.conj(tau)
    bad = np.flatnonzero(np.abs(a[:-1]) >= 1.0)
    if bad.size:
        k = int(bad[0]) + 1
        raise DomainError(f"recovered |a_{k}| = {abs(a[bad[0]]):.6g} >= 1: input is not unitary", index=k)
    a[-1] = a[-1] / abs(a[-1])
    C = build_C_ab(a, rho(a[:-1]))
    Cd = C.to_dense()

    # V H = C V, column j-1:  h_{j,j-1} v_j = C v_{j-1} - sum_{k<j} h_{k,j-1} v_k.
    # The division amplifies the O(eps) non-unitarity of the input by about
    # 1/|h_{j,j-1}| per column; working precision does not change that.
    V = np.zeros((n, n), dtype=complex)
    for j in range(1, min(n, 2) + 1):
        V[j - 1, j - 1] = np.conj(tau[j - 1]) / abs(tau[j - 1])
    for j in range(3, n + 1):
        h = A[j - 1, j - 2]
        for i in range(1, min(2 * j - 2, n) + 1):
            k0, k1 = max(1, i - 2), min(i + 2, 2 * j - 4, n)
            s = np.dot(Cd[i - 1, k0 - 1 : k1], V[k0 - 1 : k1, j - 2])
            k0 = max(1, min(i, (i + 3) // 2))
            s -= np.dot(A[k0 - 1 : j - 1, j - 2], V[i - 1, k0 - 1 : j - 1])
            V[i - 1, j - 1] = s / h
    lengths = [min(j, n) if j <= 2 else min(2 * j - 2, n) for j in range(1, n + 1)]
    Vc = ColumnCompressed(n, [V[: lengths[j], j].copy() for j in range(n)])
    ortho = float(np.max(np.abs(V.conj().T @ V - np.eye(n))))
    if strict and ortho > ORTHO_TOL:
        raise ConvergenceError(
            f"column recursion lost orthogonality: ||V*V - I|| = {ortho:.2e} > {ORTHO_TOL:g}; "
            "the input is too ill-conditioned (small subdiagonal entries)",
            residual=ortho,
        )
    sim = float(np.max(np.abs(V.conj().T @ Cd @ V - A)))
    return ReductionResult(tau, a, C, Vc, sim, ortho)
