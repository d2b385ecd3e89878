import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvkit.bands import build_C, build_H, build_H_ab, normalize_ab
from cmvkit import reduction
from cmvkit.errors import ConvergenceError, DomainError, ReducibleError, UsageError
from cmvkit.opuc import SchurSeq, random_finite, rho
from cmvkit.reduction import five_diagonal_reduce

from .helpers import random_hessenberg_input


class TestRoundTrip:
    @given(st.integers(1, 40), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_recovers_parameters(self, N, seed):
        seq = random_finite(np.random.default_rng(seed), N, radius=0.8)
        out = five_diagonal_reduce(build_H(seq))
        np.testing.assert_allclose(out.schur, seq.coefficients(N), atol=1e-13)
        assert out.similarity_residual < 1e-10
        assert out.orthogonality_residual < 1e-10

    def test_similarity_is_explicit(self, rng):
        seq = random_finite(rng, 25, radius=0.8)
        H = build_H(seq).to_dense()
        out = five_diagonal_reduce(H)
        V = out.V.to_dense()
        np.testing.assert_allclose(V.conj().T @ out.C.to_dense() @ V, H, atol=1e-11)

    def test_column_profile(self, rng):
        out = five_diagonal_reduce(build_H(random_finite(rng, 12, radius=0.8)))
        lengths = [c.size for c in out.V.columns]
        assert lengths == [1, 2, 4, 6, 8, 10, 12, 12, 12, 12, 12, 12]

    def test_phased_subdiagonal(self, rng):
        # b_n with arbitrary phases: tau carries the phases, |a_n| is unchanged
        a, b, H = random_hessenberg_input(rng, 15)
        out = five_diagonal_reduce(H)
        np.testing.assert_allclose(np.abs(out.schur), np.abs(a), atol=1e-13)
        np.testing.assert_allclose(out.tau[1:], np.cumprod(b), atol=1e-13)
        assert out.similarity_residual < 1e-10

    def test_agrees_with_diagonal_normalization(self, rng):
        a, b, H = random_hessenberg_input(rng, 10)
        norm = normalize_ab(a, b)
        out = five_diagonal_reduce(H)
        ev_out = np.sort_complex(np.linalg.eigvals(out.C.to_dense()))
        ev_norm = np.sort_complex(np.linalg.eigvals(build_H_ab(norm.a, rho(norm.a[:-1])).to_dense()))
        np.testing.assert_allclose(ev_out, ev_norm, atol=1e-12)

    def test_order_one(self):
        out = five_diagonal_reduce(np.array([[1j]]))
        np.testing.assert_allclose(out.schur, [-1j])


class TestFailures:
    def test_not_unitary(self):
        with pytest.raises(DomainError):
            five_diagonal_reduce(np.array([[1.0, 0.0], [0.5, 1.0]]))

    def test_reducible_names_entry(self, rng):
        H1 = build_H(random_finite(rng, 3)).to_dense()
        H2 = build_H(random_finite(rng, 2)).to_dense()
        H = np.zeros((5, 5), dtype=complex)
        H[:3, :3], H[3:, 3:] = H1, H2
        with pytest.raises(ReducibleError) as info:
            five_diagonal_reduce(H)
        assert info.value.index == 3

    def test_not_hessenberg(self):
        with pytest.raises(UsageError):
            five_diagonal_reduce(np.eye(3)[[1, 2, 0]])

    def test_not_square(self):
        with pytest.raises(UsageError):
            five_diagonal_reduce(np.zeros((2, 3)))

    def test_strict_refuses_ill_conditioned(self):
        seq = random_finite(np.random.default_rng(1), 60, radius=0.99)
        H = build_H(seq)
        with pytest.raises(ConvergenceError) as info:
            five_diagonal_reduce(H)
        assert info.value.residual > reduction.ORTHO_TOL
        lenient = five_diagonal_reduce(H, strict=False)
        assert lenient.orthogonality_residual > reduction.ORTHO_TOL
        # the parameters come from the first row and stay exact
        np.testing.assert_allclose(lenient.schur, seq.coefficients(60), atol=1e-13)


class TestEigenvectorMap:
    def test_maps_C_eigenvectors_to_H(self, rng):
        seq = random_finite(rng, 14, radius=0.8)
        H = build_H(seq).to_dense()
        out = five_diagonal_reduce(H)
        vals, vecs = np.linalg.eig(out.C.to_dense())
        for lam, y in zip(vals, vecs.T):
            x = out.map_eigenvector(lam, y)
            assert np.linalg.norm(H @ x - lam * x) < 1e-10 * np.linalg.norm(x)

    def test_zero_first_entry(self, rng):
        out = five_diagonal_reduce(build_H(random_finite(rng, 4, radius=0.8)))
        with pytest.raises(DomainError):
            out.map_eigenvector(1.0, np.array([0, 1, 0, 0]))

    def test_same_as_standard_C(self, rng):
        seq = random_finite(rng, 9, radius=0.8)
        out = five_diagonal_reduce(build_H(seq))
        np.testing.assert_allclose(out.C.to_dense(), build_C(SchurSeq.finite(out.schur[:-1], out.schur[-1])).to_dense())


class TestStructure:
    def test_identity_case_tau(self, rng):
        seq = random_finite(rng, 12, radius=0.8)
        out = five_diagonal_reduce(build_H(seq))
        a = seq.coefficients(12)
        expected = np.concatenate([[1.0], np.cumprod(rho(a[:-1]))])
        np.testing.assert_allclose(out.tau, expected, atol=1e-15)
        assert np.all(out.tau.real > 0)

    def test_phased_input_similarity(self, rng):
        a, b, H = random_hessenberg_input(rng, 32, radius=0.6)
        out = five_diagonal_reduce(H)
        V = out.V.to_dense()
        assert np.max(np.abs(V.conj().T @ out.C.to_dense() @ V - H.to_dense())) <= 1e-9

    @given(st.integers(2, 128), st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_round_trip_matrix(self, N, seed):
        # the column recursion stays below 1e-10 up to N = 128 for radius 0.3
        seq = random_finite(np.random.default_rng(seed), N, radius=0.3)
        out = five_diagonal_reduce(build_H(seq))
        np.testing.assert_allclose(out.C.to_dense(), build_C(seq).to_dense(), atol=1e-11)

    def test_sparsity_and_leading_columns(self, rng):
        out = five_diagonal_reduce(build_H(random_finite(rng, 11, radius=0.8)))
        V = out.V.to_dense()
        for j in range(3, 12):
            assert np.all(V[2 * j - 2 :, j - 1] == 0)
        for j in (1, 2):
            col = V[:, j - 1]
            assert abs(abs(col[j - 1]) - 1.0) < 1e-15
            assert np.all(np.delete(col, j - 1) == 0)
