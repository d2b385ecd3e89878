import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvkit.bands import (
    BandMatrix,
    HessMat,
    ParaTriMat,
    ThetaBlock,
    block_decompose,
    build_C,
    build_C_ab,
    build_H,
    build_H_ab,
    normalize_ab,
    olp_residual_check,
    reassemble,
    split_tail,
    theta_factor_C,
    theta_factor_C_ab,
)
from cmvkit.errors import DomainError, ReducibleError, UsageError
from cmvkit.opuc import SchurSeq, constant, random_finite, rho
from cmvkit.spectral import psi_roots

from .helpers import match_distance, random_block_band


def explicit_C4(a):
    """The 4x4 para-tridiagonal matrix written out entry by entry."""
    a1, a2, a3, a4 = a
    r1, r2, r3 = rho(np.array([a1, a2, a3]))
    c = np.conj
    return np.array(
        [
            [-a1, -r1 * a2, r1 * r2, 0],
            [r1, -c(a1) * a2, c(a1) * r2, 0],
            [0, -r2 * a3, -c(a2) * a3, -r3 * a4],
            [0, r2 * r3, c(a2) * r3, -c(a3) * a4],
        ]
    )


class TestBandMatrix:
    @given(st.integers(1, 12), st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_product_matches_dense(self, n, p, q, seed):
        g = np.random.default_rng(seed)
        A = g.normal(size=(n, n)) + 1j * g.normal(size=(n, n))
        B = g.normal(size=(n, n)) + 1j * g.normal(size=(n, n))
        A = np.triu(np.tril(A, q), -p)
        B = np.triu(np.tril(B, p), -q)
        bA, bB = BandMatrix.from_dense(A, p, q), BandMatrix.from_dense(B, q, p)
        np.testing.assert_allclose((bA @ bB).to_dense(), A @ B, atol=1e-12)
        np.testing.assert_allclose((bA + bB).to_dense(), A + B, atol=1e-12)
        np.testing.assert_allclose(bA.H.to_dense(), A.conj().T)
        v = g.normal(size=n) + 0j
        np.testing.assert_allclose(bA @ v, A @ v, atol=1e-12)

    def test_from_dense_rejects_out_of_band(self):
        with pytest.raises(UsageError):
            BandMatrix.from_dense(np.ones((4, 4)), 1, 1)

    def test_json_round_trip(self, rng):
        C = build_C(random_finite(rng, 9))
        back = BandMatrix.from_json(C.to_json())
        np.testing.assert_array_equal(back.to_dense(), C.to_dense())

    def test_order_one(self):
        C = build_C(SchurSeq.finite([], 1j))
        np.testing.assert_allclose(C.to_dense(), [[-1j]])


class TestParaTridiagonal:
    def test_explicit_4x4(self, rng):
        seq = random_finite(rng, 4)
        np.testing.assert_allclose(build_C(seq).to_dense(), explicit_C4(seq.coefficients(4)), atol=1e-15)

    @given(st.integers(1, 40), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_unitary_and_pattern(self, N, seed):
        seq = random_finite(np.random.default_rng(seed), N, radius=0.99)
        C = build_C(seq)
        assert isinstance(C, ParaTriMat)
        assert C.unitarity_residual() < 1e-13
        assert C.pattern_violation() == 0

    def test_infinite_section_is_isometric_on_leading_columns(self):
        C = build_C(constant(0.5 + 0.3j), 12).to_dense()
        G = C.conj().T @ C
        np.testing.assert_allclose(G[:10, :10], np.eye(10), atol=1e-14)

    def test_spectrum_equals_hessenberg(self, rng):
        seq = random_finite(rng, 30)
        ev_C = np.linalg.eigvals(build_C(seq).to_dense())
        ev_H = np.linalg.eigvals(build_H(seq).to_dense())
        assert match_distance(ev_C, ev_H) < 1e-11

    @pytest.mark.parametrize("N", [1, 2, 3, 8, 9])
    def test_olp_relation(self, N, rng):
        seq = random_finite(rng, N)
        for z in (0.7 + 0.2j, np.exp(1.3j), 1.4 - 0.9j):
            assert olp_residual_check(seq, z) < 1e-12 * max(1.0, abs(z) ** N)


class TestGeneralForm:
    def test_ab_reduces_to_standard(self, rng):
        seq = random_finite(rng, 10)
        a = seq.coefficients(10)
        np.testing.assert_allclose(build_C_ab(a, rho(a[:-1])).to_dense(), build_C(seq).to_dense())
        np.testing.assert_allclose(build_H_ab(a, rho(a[:-1])).to_dense(), build_H(seq).to_dense())

    def test_ab_unitary_with_phases(self, rng):
        a = random_finite(rng, 15).coefficients(15)
        b = rho(a[:-1]) * np.exp(1j * rng.uniform(0, 6, 14))
        assert build_C_ab(a, b).unitarity_residual() < 1e-13
        assert build_H_ab(a, b).column_gram_residual() < 1e-13

    def test_bad_norm_names_index(self):
        with pytest.raises(DomainError) as info:
            build_C_ab([0.5, 0.5, 1.0], [0.5, np.sqrt(0.75)])
        assert info.value.index == 1

    def test_normalization(self, rng):
        a = random_finite(rng, 11).coefficients(11)
        b = rho(a[:-1]) * np.exp(1j * rng.uniform(0, 6, 10))
        norm = normalize_ab(a, b)
        assert norm.residual_H < 1e-14
        assert norm.residual_C < 1e-14
        np.testing.assert_allclose(np.abs(norm.S), 1.0)

    def test_normalization_refuses_zero_coupling(self):
        with pytest.raises(ReducibleError):
            normalize_ab([0.5, 1.0, 0.2, 1.0], [np.sqrt(0.75), 0.0, np.sqrt(0.96)])


class TestFactorization:
    @given(st.integers(1, 30), st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_product(self, N, seed):
        seq = random_finite(np.random.default_rng(seed), N)
        Co, Ce = theta_factor_C(seq)
        np.testing.assert_allclose((Co @ Ce).to_dense(), build_C(seq).to_dense(), atol=1e-14)

    def test_factors_are_tridiagonal_unitary(self, rng):
        Co, Ce = theta_factor_C(random_finite(rng, 13))
        for F in (Co, Ce):
            assert F.unitarity_residual() < 1e-14
            assert max(abs(k) for k in F.bands) <= 1

    def test_general_form_uses_transpose(self, rng):
        a = random_finite(rng, 9).coefficients(9)
        b = rho(a[:-1]) * np.exp(1j * rng.uniform(0, 6, 8))
        Co, Ce = theta_factor_C_ab(a, b)
        np.testing.assert_allclose((Co @ Ce.T).to_dense(), build_C_ab(a, b).to_dense(), atol=1e-14)


class TestBlockDecomposition:
    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_blocks_bounded(self, q, rng):
        for n in (5, 17, 64):
            M, sizes = random_block_band(rng, n, q)
            blocks = block_decompose(M, 1, q)
            assert [b.shape[0] for b in blocks] == sizes
            assert np.max(np.abs(reassemble(blocks) - M)) < 1e-12

    def test_bandwidth_is_checked(self, rng):
        # an irreducible unitary Hessenberg matrix of order 3 is (1, 2)-diagonal, not (1, 1)
        H = build_H(random_finite(rng, 3)).to_dense()
        M = reassemble([H, H])
        with pytest.raises(UsageError):
            block_decompose(M, 1, 1)
        assert len(block_decompose(M, 1, 2)) == 2

    def test_non_unitary(self):
        with pytest.raises(DomainError):
            block_decompose(np.diag([1.0, 2.0]), 1, 1)

    def test_unimodular_interior_splits_C(self, rng):
        seq = random_finite(rng, 12)
        a = seq.coefficients(12).copy()
        for K in (3, 6):
            a_k = a.copy()
            a_k[K - 1] = np.exp(1j * rng.uniform(0, 6))
            b = rho(a_k[:-1])
            b[K - 1] = 0.0
            C = build_C_ab(a_k, b).to_dense()
            blocks = block_decompose(C, 2, 2)
            head = build_C(SchurSeq.finite(a_k[: K - 1], a_k[K - 1])).to_dense()
            np.testing.assert_allclose(blocks[0], head, atol=1e-15)
            np.testing.assert_allclose(reassemble(blocks[1:]), split_tail(a_k, K), atol=1e-15)

    @pytest.mark.parametrize("K", [1, 2, 5, 8])
    def test_split_tail_is_rotated_form(self, K, rng):
        # conj(a_K) rotates both the parameters and the couplings of the tail
        a = random_finite(rng, 10).coefficients(10).copy()
        a[K - 1] = np.exp(1j * rng.uniform(0, 6))
        u = a[K - 1]
        rotated = np.conj(u) * a[K:]
        M = build_C_ab(rotated, np.conj(u) * rho(rotated[:-1])).to_dense()
        np.testing.assert_allclose(split_tail(a, K), M.T if K % 2 else M, atol=1e-15)

    def test_split_tail_requires_unimodular(self):
        with pytest.raises(DomainError):
            split_tail(np.array([0.3, 0.5, 1.0]), 2)


class TestHessenberg:
    def test_infinite_section_keeps_edge(self):
        H = build_H(constant(0.4j), 6)
        full = H.to_dense_full()
        assert full.shape == (7, 6)
        assert full[6, 5] == pytest.approx(rho(0.4j))
        assert H.column_gram_residual() < 1e-14

    def test_json_round_trip(self, rng):
        H = build_H(random_finite(rng, 7))
        np.testing.assert_array_equal(HessMat.from_json(H.to_json()).to_dense(), H.to_dense())

    def test_first_row(self, rng):
        # h_{1,n} = -a_n conj(rho_1 ... rho_{n-1}) for the standard form
        seq = random_finite(rng, 6)
        a = seq.coefficients(6)
        H = build_H(seq).to_dense()
        expected = -a * np.concatenate([[1.0], np.cumprod(rho(a[:-1]))])
        np.testing.assert_allclose(H[0], expected, atol=1e-15)


class TestSmallCases:
    def test_order_two_template(self):
        a1, u = 0.3 - 0.4j, np.exp(0.5j)
        r1 = rho(a1)
        expected = np.array([[-a1, -r1 * u], [r1, -np.conj(a1) * u]])
        np.testing.assert_allclose(build_C(SchurSeq.finite([a1], u)).to_dense(), expected, atol=1e-16)

    def test_hessenberg_order_one(self):
        np.testing.assert_allclose(build_H(SchurSeq.finite([], -1j)).to_dense(), [[1j]])

    def test_hessenberg_third_column(self, rng):
        seq = random_finite(rng, 3)
        a = seq.coefficients(3)
        r = rho(a[:2])
        col = build_H(seq).to_dense()[:, 2]
        np.testing.assert_allclose(
            col, [-r[0] * r[1] * a[2], -np.conj(a[0]) * r[1] * a[2], -np.conj(a[1]) * a[2]], atol=1e-16
        )

    @pytest.mark.parametrize("N", [64, 512])
    def test_large_unitarity(self, N, rng):
        seq = random_finite(rng, N)
        C = build_C(seq).to_dense()
        assert np.max(np.abs(C.conj().T @ C - np.eye(N))) <= 1e-12
        assert np.max(np.abs(C @ C.conj().T - np.eye(N))) <= 1e-12
        H = build_H(seq).to_dense()
        assert np.max(np.abs(H.conj().T @ H - np.eye(N))) <= 1e-12

    def test_phased_general_form(self, rng):
        a = random_finite(rng, 32).coefficients(32)
        b = rho(a[:-1]) * np.exp(1j * rng.uniform(0, 2 * np.pi, 31))
        C = build_C_ab(a, b).to_dense()
        assert np.max(np.abs(C.conj().T @ C - np.eye(32))) <= 1e-12
        ev = np.linalg.eigvals(C)
        assert match_distance(ev, np.linalg.eigvals(build_C(SchurSeq.finite(a[:-1], a[-1])).to_dense())) < 1e-9

    def test_zero_coupling_is_direct_sum(self, rng):
        a = random_finite(rng, 10).coefficients(10).copy()
        a[3] = np.exp(0.7j)
        b = rho(a[:-1])
        b[3] = 0.0
        C = build_C_ab(a, b).to_dense()
        assert np.all(C[:4, 4:] == 0) and np.all(C[4:, :4] == 0)

    def test_free_factors(self):
        Co, Ce = theta_factor_C(SchurSeq.finite(np.zeros(5), 1.0))
        swap = np.array([[0, 1], [1, 0]])
        np.testing.assert_array_equal(Co.to_dense()[:2, :2], swap)
        np.testing.assert_array_equal(Ce.to_dense()[1:3, 1:3], swap)
        assert Ce.to_dense()[0, 0] == 1

    def test_factors_symmetric(self, rng):
        Co, Ce = theta_factor_C(random_finite(rng, 40))
        for F in (Co, Ce):
            np.testing.assert_array_equal(F.to_dense(), F.to_dense().T)

    def test_real_coupling_needs_no_rotation(self, rng):
        a = random_finite(rng, 8).coefficients(8)
        norm = normalize_ab(a, rho(a[:-1]))
        np.testing.assert_allclose(norm.R, 1.0)
        np.testing.assert_allclose(norm.S, 1.0)

    def test_rotated_coupling(self, rng):
        a = random_finite(rng, 16).coefficients(16)
        norm = normalize_ab(a, np.exp(1j * np.pi / 3) * rho(a[:-1]))
        assert norm.residual_H <= 1e-12
        assert norm.residual_C <= 1e-12

    def test_theta_block_unitary(self):
        a = 0.6 - 0.2j
        T = ThetaBlock(a, rho(a) * np.exp(0.3j), 1).matrix
        assert np.max(np.abs(T.conj().T @ T - np.eye(2))) <= 1e-15

    def test_diagonal_unitary_splits_fully(self, rng):
        D = np.diag(np.exp(1j * rng.uniform(0, 6, 9)))
        assert [b.shape for b in block_decompose(D, 1, 1)] == [(1, 1)] * 9

    def test_olp_at_root(self, rng):
        for N in (4, 7):
            seq = random_finite(rng, N)
            for z in psi_roots(seq):
                assert olp_residual_check(seq, z) <= 1e-10
