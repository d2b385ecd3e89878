"""Five-diagonal (para-tridiagonal) and Hessenberg unitary representations.

Band matrices are stored by diagonal offset: ``bands[k][i] == M[i, i + k]``
(0-based, zero where ``i + k`` falls outside the matrix), so every stored
array has length ``n`` and banded products are shifted elementwise products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import block_diag

from .errors import DomainError, ReducibleError, UsageError
from .opuc import SchurSeq, eval_olp, kappa, para_orthogonal_psi, rho

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
CUT_TOL = 1e-10


class BandMatrix:
    """Square complex band matrix stored by diagonal offset."""

    def __init__(self, n, bands):
        self.n = int(n)
        self.bands = {}
        for k, v in bands.items():
            v = np.asarray(v, dtype=complex)
            if v.shape != (self.n,):
                raise UsageError(f"band {k} must have length {self.n}, got {v.shape}")
            self.bands[int(k)] = v

    @property
    def lower(self):
        return max([-k for k in self.bands if k < 0], default=0)

    @property
    def upper(self):
        return max([k for k in self.bands if k > 0], default=0)

    @classmethod
    def identity(cls, n):
        return cls(n, {0: np.ones(n)})

    @classmethod
    def from_dense(cls, M, lower=None, upper=None):
        M = np.asarray(M, dtype=complex)
        n = M.shape[0]
        lower = n - 1 if lower is None else min(int(lower), n - 1)
        upper = n - 1 if upper is None else min(int(upper), n - 1)
        outside = np.triu(M, upper + 1) + np.tril(M, -lower - 1)
        if np.any(outside):
            raise UsageError(f"matrix has entries outside the ({lower}, {upper}) band")
        bands = {}
        for k in range(-lower, upper + 1):
            d = np.zeros(n, dtype=complex)
            if k >= 0:
                d[: n - k] = np.diagonal(M, k)
            else:
                d[-k:] = np.diagonal(M, k)
            if np.any(d):
                bands[k] = d
        return cls(n, bands)

    def diagonal(self, k):
        """Offset-``k`` diagonal in :func:`numpy.diagonal` convention (length ``n - |k|``)."""
        v = self.bands.get(k)
        if v is None:
            return np.zeros(self.n - abs(k), dtype=complex)
        return v[: self.n - k].copy() if k >= 0 else v[-k:].copy()

    def __getitem__(self, ij):
        i, j = ij
        v = self.bands.get(j - i)
        return 0j if v is None else complex(v[i])

    def to_dense(self):
        M = np.zeros((self.n, self.n), dtype=complex)
        for k in self.bands:
            if abs(k) < self.n:
                M += np.diag(self.diagonal(k), k)
        return M

    def _shifted(self, k, by):
        """``out[i] = bands[k][i + by]`` with zero fill."""
        v = self.bands[k]
        out = np.zeros(self.n, dtype=complex)
        if abs(by) >= self.n:
            return out
        if by >= 0:
            out[: self.n - by] = v[by:]
        else:
            out[-by:] = v[: self.n + by]
        return out

    @property
    def T(self):
        return BandMatrix(self.n, {-k: self._shifted(k, -k) for k in self.bands})

    def conj(self):
        return BandMatrix(self.n, {k: np.conj(v) for k, v in self.bands.items()})

    @property
    def H(self):
        return self.T.conj()

    def __matmul__(self, other):
        if isinstance(other, BandMatrix):
            if other.n != self.n:
                raise UsageError("dimension mismatch")
            out = {}
            for ka, va in self.bands.items():
                for kb in other.bands:
                    prod = va * other._shifted(kb, ka)
                    k = ka + kb
                    out[k] = out[k] + prod if k in out else prod
            return BandMatrix(self.n, out)
        x = np.asarray(other, dtype=complex)
        y = np.zeros(self.n, dtype=complex)
        for k, v in self.bands.items():
            if k >= 0:
                y[: self.n - k] += v[: self.n - k] * x[k:]
            else:
                y[-k:] += v[-k:] * x[: self.n + k]
        return y

    def _combine(self, other, sign):
        out = {k: v.copy() for k, v in self.bands.items()}
        for k, v in other.bands.items():
            out[k] = out[k] + sign * v if k in out else sign * v
        return BandMatrix(self.n, out)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return BandMatrix(self.n, {k: c * v for k, v in self.bands.items()})

    __rmul__ = __mul__

    def shift(self, w):
        """``M - w I``."""
        return self - BandMatrix.identity(self.n) * w

    def unitarity_residual(self):
        """``max(||M*M - I||_max, ||M M* - I||_max)`` from banded products."""
        eye = BandMatrix.identity(self.n)
        r1 = max(np.max(np.abs(v)) for v in (self.H @ self - eye).bands.values())
        r2 = max(np.max(np.abs(v)) for v in (self @ self.H - eye).bands.values())
        return float(max(r1, r2))

    def to_json(self):
        """``{"order": n, "bands": {offset: [[re, im], ...]}}`` with numpy-diagonal lengths."""
        return {
            "order": self.n,
            "bands": {
                str(k): [[float(x.real), float(x.imag)] for x in self.diagonal(k)]
                for k in sorted(self.bands)
            },
        }

    @classmethod
    def from_json(cls, doc):
        n = int(doc["order"])
        M = np.zeros((n, n), dtype=complex)
        for k, vals in doc["bands"].items():
            d = np.array([complex(re, im) for re, im in vals])
            M += np.diag(d, int(k))
        return cls.from_dense(M)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, offsets={sorted(self.bands)})"


class ParaTriMat(BandMatrix):
    """Five-diagonal matrix with the para-tridiagonal zero pattern.

    In 1-based indices ``c[2k, 2k+2] = c[2k+1, 2k-1] = 0`` for ``k >= 1``.
    """

    def __init__(self, n, bands):
        super().__init__(n, bands)
        if self.lower > 2 or self.upper > 2:
            raise UsageError("a para-tridiagonal matrix is five-diagonal")

    def pattern_violation(self):
        """Largest modulus among the entries the pattern forces to zero."""
        worst = 0.0
        if 2 in self.bands:
            worst = max(worst, float(np.max(np.abs(self.bands[2][1::2]), initial=0.0)))
        if -2 in self.bands:
            worst = max(worst, float(np.max(np.abs(self.bands[-2][2::2]), initial=0.0)))
        return worst

    def principal(self, m):
        """Leading ``m x m`` block as a para-tridiagonal matrix."""
        return ParaTriMat(m, {k: _clip(v[:m], k, m) for k, v in self.bands.items()})


def _clip(v, k, m):
    v = v.copy()
    if k > 0:
        v[m - k:] = 0
    return v


class HessMat:
    """Upper Hessenberg matrix stored column by column.

    ``columns[j]`` (0-based) holds rows ``0 .. min(j + 1, order - 1)``.  For a
    principal section of an infinite matrix, ``open_edge`` keeps the entry
    ``h[order, order - 1]`` that falls just outside, so that the
    ``(order + 1) x order`` section is available for isometry checks.
    """

    def __init__(self, columns, open_edge=None):
        self.columns = [np.asarray(c, dtype=complex) for c in columns]
        self.order = len(self.columns)
        for j, c in enumerate(self.columns):
            if c.shape != (min(j + 2, self.order),):
                raise UsageError(f"column {j} has length {c.size}, expected {min(j + 2, self.order)}")
        self.open_edge = None if open_edge is None else complex(open_edge)

    def __getitem__(self, ij):
        i, j = ij
        c = self.columns[j]
        return complex(c[i]) if i < c.size else 0j

    def to_dense(self):
        H = np.zeros((self.order, self.order), dtype=complex)
        for j, c in enumerate(self.columns):
            H[: c.size, j] = c
        return H

    def to_dense_full(self):
        """``(order + 1) x order`` section including ``open_edge`` (zero if closed)."""
        H = np.zeros((self.order + 1, self.order), dtype=complex)
        H[: self.order] = self.to_dense()
        if self.open_edge is not None:
            H[self.order, self.order - 1] = self.open_edge
        return H

    def subdiagonal(self):
        return np.array([self.columns[j][j + 1] for j in range(self.order - 1)])

    def __matmul__(self, x):
        return self.to_dense() @ np.asarray(x, dtype=complex)

    def column_gram_residual(self):
        """``||G - I||_max`` for the Gram matrix of the (full) columns."""
        Hf = self.to_dense_full()
        return float(np.max(np.abs(Hf.conj().T @ Hf - np.eye(self.order))))

    @classmethod
    def from_dense(cls, H):
        H = np.asarray(H, dtype=complex)
        n = H.shape[0]
        below = np.tril(H, -2)
        if np.any(np.abs(below) > 0):
            raise UsageError("matrix is not upper Hessenberg")
        return cls([H[: min(j + 2, n), j].copy() for j in range(n)])

    def to_json(self):
        return {
            "order": self.order,
            "columns": [[[float(x.real), float(x.imag)] for x in c] for c in self.columns],
        }

    @classmethod
    def from_json(cls, doc):
        return cls([[complex(re, im) for re, im in c] for c in doc["columns"]])

    def __repr__(self):
        return f"HessMat(order={self.order})"


@dataclass(frozen=True)
class ThetaBlock:
    """``Theta(a, b) = [[-a, conj b], [b, conj a]]`` placed at rows/cols ``index, index+1`` (1-based)."""

    a: complex
    b: complex
    index: int

    @property
    def matrix(self):
        a, b = self.a, self.b
        return np.array([[-a, np.conj(b)], [b, np.conj(a)]], dtype=complex)


# construction ---------------------------------------------------------------


def _section(seq, size):
    """Parameters ``a_1 .. a_size`` with the finite/infinite size contract."""
    if not isinstance(seq, SchurSeq):
        raise UsageError("expected a SchurSeq")
    if seq.is_finite:
        if size is None:
            size = seq.order
        if int(size) != seq.order:
            raise UsageError(f"finite sequence has order {seq.order}, requested size {size}")
    elif size is None:
        raise UsageError("an infinite sequence needs an explicit size")
    size = int(size)
    if size < 1:
        raise UsageError("size must be at least 1")
    return seq.coefficients(size), size


def _para_entries(a, b, N, lead=1.0):
    """Dense entries of ``C(a_N, b_{N-1})`` from the block template.

    With ``a_0 = lead`` (normally 1), ``b_0 = 0`` and ``B_n = [[-conj(b_{n-1}) a_n, conj(b_{n-1}) b_n],
    [-conj(a_{n-1}) a_n, conj(a_{n-1}) b_n]]``, rows ``2m-1, 2m`` carry ``B_{2m-1}^T``
    in columns ``2m-2, 2m-1`` and ``B_{2m}`` in columns ``2m, 2m+1`` (1-based).
    """
    ae = np.concatenate([[lead], a])
    be = np.concatenate([[0.0], b, np.zeros(N + 1 - b.size)])
    M = np.zeros((N + 2, N + 2), dtype=complex)
    for n in range(1, N + 1):
        B = np.array(
            [
                [-np.conj(be[n - 1]) * ae[n], np.conj(be[n - 1]) * be[n]],
                [-np.conj(ae[n - 1]) * ae[n], np.conj(ae[n - 1]) * be[n]],
            ]
        )
        m = (n + 1) // 2
        rows = (2 * m - 1, 2 * m)
        if n % 2:
            cols = (2 * m - 2, 2 * m - 1)
            B = B.T
        else:
            cols = (2 * m, 2 * m + 1)
        for r in range(2):
            for c in range(2):
                if rows[r] >= 1 and cols[c] >= 1:
                    M[rows[r], cols[c]] = B[r, c]
    return M[1 : N + 1, 1 : N + 1]


def _as_para(M):
    return ParaTriMat(M.shape[0], BandMatrix.from_dense(M, 2, 2).bands)


def build_C(seq, size=None):
    """Para-tridiagonal representation ``C(a_N)`` (finite) or the order-``size`` section of ``C(a)``."""
    a, N = _section(seq, size)
    return _as_para(_para_entries(a, rho(a[: N - 1]), N))


def _check_ab(a, b, N):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size < N:
        raise UsageError(f"need {N} values of a, got {a.size}")
    if b.size < N - 1:
        raise UsageError(f"need at least {N - 1} values of b, got {b.size}")
    a = a[:N]
    nb = min(b.size, N)
    dev = np.abs(np.abs(a[:nb]) ** 2 + np.abs(b[:nb]) ** 2 - 1.0)
    bad = np.flatnonzero(dev > NORM_TOL)
    if bad.size:
        k = int(bad[0]) + 1
        raise DomainError(f"|a_{k}|^2 + |b_{k}|^2 = {1 - dev[bad[0]]:.3g} deviates from 1", index=k)
    if nb == N - 1 and abs(abs(a[N - 1]) - 1.0) > NORM_TOL:
        raise DomainError(f"terminal a_{N} must be unimodular when b_{N} is omitted", index=N)
    return a, b[:nb]


def build_C_ab(a, b, size=None):
    """General unitary para-tridiagonal matrix ``C(a_N, b_{N-1})``."""
    N = len(a) if size is None else int(size)
    a, b = _check_ab(a, b, N)
    return _as_para(_para_entries(a, b[: N - 1], N))


def _hess_columns(a, b, N):
    """Columns ``h_n = b_n e_{n+1} - a_n v_n`` with ``v_{n+1} = conj(b_n) v_n + conj(a_n) e_{n+1}``."""
    cols = []
    v = np.array([1.0 + 0j])
    for n in range(N):
        h = -a[n] * v
        if n + 1 < N:
            h = np.append(h, b[n])
            v = np.append(np.conj(b[n]) * v, np.conj(a[n]))
        cols.append(h)
    return cols


def build_H(seq, size=None):
    """Hessenberg representation ``H(a_N)`` (finite) or the order-``size`` section of ``H(a)``."""
    a, N = _section(seq, size)
    r = rho(a)
    edge = None if seq.is_finite else r[N - 1]
    return HessMat(_hess_columns(a, r, N), open_edge=edge)


def build_H_ab(a, b, size=None):
    """General isometric Hessenberg matrix ``H(a_N, b_{N-1})``."""
    N = len(a) if size is None else int(size)
    a, b = _check_ab(a, b, N)
    edge = b[N - 1] if b.size >= N else None
    return HessMat(_hess_columns(a, b, N), open_edge=edge)


# factorization and similarity -------------------------------------------------


def _theta_diag(blocks, N, start):
    """Block-diagonal tridiagonal band matrix from Theta blocks starting at row ``start`` (0-based)."""
    d0 = np.ones(N, dtype=complex)
    d1 = np.zeros(N, dtype=complex)
    dm = np.zeros(N, dtype=complex)
    for th in blocks:
        i = th.index - 1
        T = th.matrix
        d0[i] = T[0, 0]
        if i + 1 < N:
            d0[i + 1] = T[1, 1]
            d1[i] = T[0, 1]
            dm[i + 1] = T[1, 0]
    return BandMatrix(N, {-1: dm, 0: d0, 1: d1})


def theta_blocks(a, b, N):
    """Odd and even Theta blocks of ``C(a, b)`` up to order ``N``."""
    a = np.asarray(a, dtype=complex)
    b = np.concatenate([np.asarray(b, dtype=complex), np.zeros(max(0, N - len(b)))])
    odd = [ThetaBlock(a[n - 1], b[n - 1], n) for n in range(1, N + 1, 2)]
    even = [ThetaBlock(a[n - 1], b[n - 1], n) for n in range(2, N + 1, 2)]
    return odd, even


def theta_factor_C(seq, size=None):
    """Factors ``(C_odd, C_even)`` with ``C(a) = C_odd @ C_even``.

    ``C_odd`` is the direct sum of ``Theta(a_1), Theta(a_3), ...`` and
    ``C_even = I_1 + Theta(a_2) + Theta(a_4) + ...``; a block cut by the
    order-``N`` boundary keeps only its ``-a_N`` corner.
    """
    a, N = _section(seq, size)
    odd, even = theta_blocks(a, rho(a), N)
    return _theta_diag(odd, N, 0), _theta_diag(even, N, 1)


def theta_factor_C_ab(a, b, size=None):
    """Factors of the general form: ``C(a, b) = C_odd @ C_even.T``."""
    N = len(a) if size is None else int(size)
    a, b = _check_ab(a, b, N)
    odd, even = theta_blocks(a, b, N)
    return _theta_diag(odd, N, 0), _theta_diag(even, N, 1)


class ABNormalization(NamedTuple):
    a: np.ndarray
    R: np.ndarray
    S: np.ndarray
    residual_H: float
    residual_C: float


def normalize_ab(a, b, size=None):
    """Diagonal unitary similarities taking ``H(a, b)``, ``C(a, b)`` to ``H(a)``, ``C(a)``.

    Returns the equivalent parameters (``a`` unchanged, since ``|b_n| = rho_n``),
    the diagonals of ``R`` and ``S`` and the residuals
    ``||R* H(a,b) R - H(a)||_max`` and ``||S* C(a,b) S - C(a)||_max``.
    ``S = diag(conj s_1, s_2, conj s_3, s_4, ...)``.
    """
    N = len(a) if size is None else int(size)
    a, b = _check_ab(a, b, N)
    bb = b[: N - 1]
    if np.any(bb == 0):
        k = int(np.flatnonzero(bb == 0)[0]) + 1
        raise ReducibleError(
            f"b_{k} = 0: the matrix decomposes; split it with block_decompose first", index=k
        )
    ph = bb / np.abs(bb)
    r = np.concatenate([[1.0], np.cumprod(ph)])
    s = np.ones(N, dtype=complex)
    if N > 1:
        s[1] = ph[0]
    for n in range(2, N):
        w = np.conj(bb[n - 2]) * bb[n - 1]
        s[n] = s[n - 2] * w / abs(w)
    S = np.where(np.arange(N) % 2 == 0, np.conj(s), s)
    rho_a = np.abs(bb)
    H_ab = build_H_ab(a, bb, N).to_dense()
    H_a = _hess_dense(a, rho_a, N)
    C_ab = build_C_ab(a, bb, N).to_dense()
    C_a = _para_entries(a, rho_a, N)
    res_H = np.max(np.abs(np.conj(r)[:, None] * H_ab * r[None, :] - H_a))
    res_C = np.max(np.abs(np.conj(S)[:, None] * C_ab * S[None, :] - C_a))
    return ABNormalization(a.copy(), r, S, float(res_H), float(res_C))


def _hess_dense(a, b, N):
    return HessMat(_hess_columns(a, b, N)).to_dense()


# block decomposition -------------------------------------------------------------


def _dense(M):
    if isinstance(M, (BandMatrix, HessMat)):
        return M.to_dense()
    return np.asarray(M, dtype=complex)


def block_decompose(M, p, q, tol=CUT_TOL):
    """Split a unitary ``(p, q)``-diagonal matrix into its diagonal blocks.

    ``p`` and ``q`` are the lower and upper bandwidths.  A cut is placed
    before index ``K`` when every band entry coupling ``[:K]`` and ``[K:]`` is
    below ``tol``.  When ``p == 1`` or ``q == 1`` every block must have order at
    most ``p + q``; a larger block means the matrix was not unitary after all.
    """
    A = _dense(M)
    n = A.shape[0]
    if A.shape != (n, n):
        raise UsageError("block_decompose needs a square matrix")
    unit = np.max(np.abs(A.conj().T @ A - np.eye(n)))
    if unit > UNITARY_TOL:
        raise DomainError(f"matrix is not unitary (residual {unit:.2e})")
    i, j = np.indices((n, n))
    outside = (i - j > p) | (j - i > q)
    if np.any(np.abs(A[outside]) > tol):
        raise UsageError(f"matrix is not ({p},{q})-diagonal")
    cuts = [0]
    for K in range(1, n):
        up = A[max(0, K - q) : K, K : min(n, K + q)]
        lo = A[K : min(n, K + p), max(0, K - p) : K]
        if np.max(np.abs(up), initial=0) < tol and np.max(np.abs(lo), initial=0) < tol:
            cuts.append(K)
    cuts.append(n)
    blocks = [A[s:e, s:e].copy() for s, e in zip(cuts[:-1], cuts[1:])]
    if min(p, q) == 1:
        big = [b.shape[0] for b in blocks if b.shape[0] > p + q]
        if big:
            raise DomainError(
                f"block of order {big[0]} exceeds p + q = {p + q}; a unitary "
                f"({p},{q})-diagonal matrix cannot have one, so the unitarity assumption is violated"
            )
    return blocks


def reassemble(blocks):
    return block_diag(*blocks)


# OLP identity ---------------------------------------------------------------------


def olp_residual_check(seq, z):
    """``max |z X_N(z) - C^T X_N(z) - b_N z^-[(N-1)/2] psi(z)|``.

    ``b_N = kappa_{N-1} e_N`` for even ``N`` and
    ``kappa_{N-1} (rho_{N-1} e_{N-1} + conj(a_{N-1}) e_N)`` for odd ``N``
    (with ``a_0 = 1``, ``rho_0 = 0`` when ``N = 1``).
    """
    if not seq.is_finite:
        raise UsageError("olp_residual_check needs a finite sequence")
    z = complex(z)
    if z == 0:
        raise DomainError("z must be nonzero")
    N = seq.order
    X = eval_olp(seq, z, N - 1)
    C = build_C(seq).to_dense()
    psi = para_orthogonal_psi(seq)
    psi_z = np.polynomial.polynomial.polyval(z, psi)
    k = kappa(seq, N - 1)[-1]
    bN = np.zeros(N, dtype=complex)
    if N % 2 == 0:
        bN[N - 1] = k
    else:
        a_prev = 1.0 if N == 1 else seq.prefix[N - 2]
        r_prev = 0.0 if N == 1 else float(rho(a_prev))
        if N > 1:
            bN[N - 2] = k * r_prev
        bN[N - 1] = k * np.conj(a_prev)
    res = z * X - C.T @ X - bN * z ** (-((N - 1) // 2)) * psi_z
    return float(np.max(np.abs(res)))


def split_tail(a, K):
    """Exact lower block of ``C(a_N)`` when the interior ``a_K`` is unimodular.

    The coupling ``b_K = 0`` splits the matrix at ``K``.  The trailing block
    is entrywise ``C(conj(a_K) a', conj(a_K) rho')`` for even ``K`` and its
    transpose for odd ``K``, with ``a' = (a_{K+1}, ...)`` and ``rho'`` the
    matching complementary parameters.  By :func:`normalize_ab` it is
    unitarily equivalent to ``C(conj(a_K) a')``.

    Since ``|a_K| = 1`` the rotation cancels from every entry except those of
    the first block, so the block is evaluated as the template of
    ``C(a', rho')`` with the leading ``a_0 = 1`` replaced by ``a_K``; this
    avoids the rounding of ``|a_K|^2`` and reproduces the block bit for bit.
    """
    a = np.asarray(a, dtype=complex)
    K = int(K)
    if not 1 <= K < a.size:
        raise UsageError(f"split index {K} outside 1..{a.size - 1}")
    u = a[K - 1]
    if abs(abs(u) - 1.0) > NORM_TOL:
        raise DomainError(f"a_{K} is not unimodular", index=K)
    tail = a[K:]
    M = _para_entries(tail, rho(tail[:-1]), tail.size, lead=u)
    return M.T if K % 2 else M
