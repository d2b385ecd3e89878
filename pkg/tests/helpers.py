"""Oracles and generators shared by the test modules."""

import numpy as np
from scipy.linalg import hessenberg
from scipy.optimize import linear_sum_assignment
from scipy.stats import unitary_group

from cmvkit.bands import build_C, build_H_ab, reassemble
from cmvkit.opuc import random_finite, rho


def match_distance(x, y):
    """Largest distance after optimally pairing two equal-size point sets."""
    x = np.asarray(x)
    y = np.asarray(y)
    assert x.shape == y.shape
    cost = np.abs(x[:, None] - y[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))


def random_hessenberg_input(rng, N, radius=0.8):
    """Unitary Hessenberg ``H(a, b)`` with random phases on ``b_n = rho_n exp(i phi_n)``."""
    seq = random_finite(rng, N, radius=radius)
    a = seq.coefficients(N)
    b = rho(a[:-1]) * np.exp(1j * rng.uniform(0, 2 * np.pi, N - 1))
    return a, b, build_H_ab(a, b)


def nearest_eigenvalue(seq, lam):
    """Eigenvalue of the dense ``C`` closest to ``lam``."""
    ev = np.linalg.eigvals(build_C(seq).to_dense())
    return ev[np.argmin(np.abs(ev - lam))]


def finite_difference_velocity(path, t, lam, h=1e-5):
    """Central difference of the argument of the eigenvalue of ``C(t)`` nearest ``lam``."""
    up, down = nearest_eigenvalue(path.at(t + h), lam), nearest_eigenvalue(path.at(t - h), lam)
    return float(np.angle(up / down) / (2 * h))


def random_block_band(rng, n, q):
    """Random unitary (1, q)-diagonal matrix with known irreducible blocks."""
    sizes = []
    while sum(sizes) < n:
        sizes.append(int(min(rng.integers(1, q + 2), n - sum(sizes))))
    blocks = []
    for s in sizes:
        U = unitary_group.rvs(s, random_state=rng) if s > 1 else np.exp(1j * rng.uniform(0, 6, (1, 1)))
        blocks.append(hessenberg(U))
    d = np.exp(1j * rng.uniform(0, 6, n))
    return d[:, None] * reassemble(blocks) * np.conj(d)[None, :], sizes
