import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvkit.bands import build_C, build_H
from cmvkit.errors import DomainError, UsageError
from cmvkit.opuc import (
    PolyState,
    SchurSeq,
    advance_poly,
    alternating_approach_one,
    auto_terminal,
    blaschke_phase,
    constant,
    eval_olp,
    eval_op,
    geronimus_mass_point,
    geronimus_phi,
    geronimus_u,
    geronimus_w,
    kappa,
    laurent_from_op,
    mass_at,
    mass_estimate,
    masses,
    monic_op_coefficients,
    normalized_op,
    para_orthogonal_psi,
    psi_and_derivative,
    random_finite,
    rho,
)

disk_point = st.builds(
    lambda r, t: r * complex(math.cos(t), math.sin(t)),
    st.floats(0.0, 0.95),
    st.floats(0.0, 2 * math.pi),
)


def finite_seq(max_order=12):
    return st.builds(
        lambda interior, t: SchurSeq.finite(interior, complex(math.cos(t), math.sin(t))),
        st.lists(disk_point, min_size=0, max_size=max_order - 1),
        st.floats(0.0, 2 * math.pi),
    )


class TestSchurSeq:
    def test_finite_order_and_coefficients(self):
        seq = SchurSeq.finite([0.1, 0.2j], 1j)
        assert seq.order == 3
        np.testing.assert_array_equal(seq.coefficients(3), [0.1, 0.2j, 1j])

    def test_interior_outside_disk_names_index(self):
        with pytest.raises(DomainError) as info:
            SchurSeq.finite([0.1, 1.0, 0.3], 1.0)
        assert info.value.index == 2

    def test_terminal_must_be_unimodular(self):
        with pytest.raises(DomainError):
            SchurSeq.finite([0.1], 0.5)

    def test_infinite_rule_is_checked(self):
        seq = SchurSeq.infinite(lambda n: 0.5 * n, name="growing")
        with pytest.raises(DomainError) as info:
            seq.coefficients(4)
        assert info.value.index == 2

    def test_truncate_auto_terminal(self):
        seq = constant(0.6j).truncate(5)
        assert seq.order == 5
        assert seq.terminal == pytest.approx(1j)
        assert auto_terminal(0) == 1

    def test_infinite_has_no_order(self):
        with pytest.raises(UsageError):
            alternating_approach_one().order

    def test_finite_cannot_extend(self):
        with pytest.raises(UsageError):
            SchurSeq.finite([0.1], 1.0).truncate(3)

    def test_rho_clipped(self):
        assert rho(1.0 + 1e-17) == 0.0
        assert rho(0.6) == pytest.approx(0.8)


class TestRecurrence:
    def test_zero_parameters_give_monomials(self):
        z = np.exp(1j * np.linspace(0, 6, 7))
        phi, phs = eval_op(SchurSeq.infinite(), z, 5)
        np.testing.assert_allclose(phi, z[None, :] ** np.arange(6)[:, None], atol=1e-15)
        np.testing.assert_allclose(phs, 1.0, atol=1e-15)

    @given(finite_seq(), st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
    @settings(max_examples=60, deadline=None)
    def test_reversed_polynomial(self, seq, z):
        if abs(z) < 0.1:
            z = 0.5
        n = seq.order - 1
        phi, phs = eval_op(seq, np.array([z, 1 / np.conj(z)]), n)
        expected = z ** np.arange(n + 1) * np.conj(phi[:, 1])
        np.testing.assert_allclose(phs[:, 0], expected, rtol=1e-9, atol=1e-9)

    @given(finite_seq())
    @settings(max_examples=40, deadline=None)
    def test_matches_monic_coefficients(self, seq):
        n = seq.order - 1
        p, _ = monic_op_coefficients(seq.interior())
        z = np.exp(1j * np.array([0.3, 2.0, 4.1]))
        phi, _ = eval_op(seq, z, n)
        k = kappa(seq, n)[-1]
        np.testing.assert_allclose(phi[-1], k * np.polynomial.polynomial.polyval(z, p), rtol=1e-10)

    def test_orthonormal_for_discrete_measure(self, rng):
        # Gram matrix with respect to the N-point measure is the identity
        seq = random_finite(rng, 10, radius=0.9)
        z = np.linalg.eigvals(build_C(seq).to_dense())
        w = masses(seq, z)
        phi, _ = eval_op(seq, z, 9)
        gram = (phi * w) @ phi.conj().T
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-10)

    def test_laurent_orthonormal(self, rng):
        seq = random_finite(rng, 9, radius=0.9)
        z = np.linalg.eigvals(build_C(seq).to_dense())
        w = masses(seq, z)
        chi = eval_olp(seq, z, 8)
        np.testing.assert_allclose((chi * w) @ chi.conj().T, np.eye(9), atol=1e-10)

    def test_laurent_rejects_origin(self):
        with pytest.raises(DomainError):
            eval_olp(SchurSeq.finite([0.1], 1.0), np.array([0.0]), 1)

    def test_degree_limit_for_finite(self):
        with pytest.raises(UsageError):
            eval_op(SchurSeq.finite([0.1], 1.0), 1.0, 2)


class TestParaOrthogonal:
    def test_interior_zeros(self):
        psi = para_orthogonal_psi(SchurSeq.finite([0, 0, 0], 1.0))
        np.testing.assert_allclose(psi, [1, 0, 0, 0, 1], atol=1e-15)

    def test_recurrence_values_match_coefficients(self, rng):
        seq = random_finite(rng, 15)
        z = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
        p, dp, log_s = psi_and_derivative(seq, z)
        c = para_orthogonal_psi(seq)
        k = kappa(seq, 14)[-1]
        scale = np.exp(log_s) / k
        np.testing.assert_allclose(p * scale, np.polynomial.polynomial.polyval(z, c), rtol=1e-9)
        dc = np.polynomial.polynomial.polyder(c)
        np.testing.assert_allclose(dp * scale, np.polynomial.polynomial.polyval(z, dc), rtol=1e-9)

    @given(finite_seq(max_order=20), st.floats(0.0, 2 * math.pi))
    @settings(max_examples=50, deadline=None)
    def test_phase_winds_and_increases(self, seq, theta):
        th = np.array([theta, theta + 2 * math.pi])
        F, dF = blaschke_phase(seq, th)
        assert F[1] - F[0] == pytest.approx(2 * math.pi * seq.order, abs=1e-9)
        assert np.all(dF > 0)

    def test_phase_derivative(self, rng):
        seq = random_finite(rng, 12)
        th = rng.uniform(0, 2 * np.pi, 6)
        h = 1e-6
        F1, _ = blaschke_phase(seq, th + h)
        F0, _ = blaschke_phase(seq, th - h)
        _, dF = blaschke_phase(seq, th)
        np.testing.assert_allclose((F1 - F0) / (2 * h), dF, rtol=1e-7)


class TestMasses:
    def test_masses_are_first_eigenvector_weights(self, rng):
        seq = random_finite(rng, 24, radius=0.9)
        vals, vecs = np.linalg.eig(build_C(seq).to_dense())
        np.testing.assert_allclose(masses(seq, vals), np.abs(vecs[0]) ** 2, atol=1e-12)

    def test_masses_sum_to_one(self, rng):
        seq = random_finite(rng, 40)
        vals = np.linalg.eigvals(build_C(seq).to_dense())
        assert masses(seq, vals).sum() == pytest.approx(1.0, abs=1e-12)

    def test_localized_eigenvectors(self, rng):
        # moduli close to 1 near the far end localize some eigenvectors there,
        # where the forward recurrence alone loses them in roundoff
        r = np.concatenate([np.full(20, 0.4), np.full(20, 0.995)])
        a = r * np.exp(1j * rng.uniform(0, 2 * np.pi, 40))
        seq = SchurSeq.finite(a[:-1], 1.0)
        vals, vecs = np.linalg.eig(build_C(seq).to_dense())
        gaps = np.abs(vals[:, None] - vals[None, :]) + np.eye(vals.size)
        assert gaps.min() > 1e-6
        m = masses(seq, vals)
        np.testing.assert_allclose(m, np.abs(vecs[0]) ** 2, rtol=1e-6, atol=1e-30)

    def test_normalized_values(self, rng):
        # sqrt(mass) phi_n(lam) has the moduli of the unit eigenvector of H
        seq = random_finite(rng, 20)
        lam, vecs = np.linalg.eig(build_H(seq).to_dense())
        ph, _, m = normalized_op(seq, lam)
        np.testing.assert_allclose(np.abs(ph), np.abs(vecs), atol=1e-12)
        np.testing.assert_allclose(np.sum(np.abs(ph) ** 2, axis=0), 1.0)

    def test_geronimus_mass(self):
        a = 0.6j
        lam = geronimus_mass_point(a)
        expected = 2 * (abs(a) ** 2 - a.real) / abs(1 - a) ** 2
        assert expected == pytest.approx(9 / 17)
        est = mass_estimate(constant(a), lam, 400)
        assert est.converged
        assert est.mass == pytest.approx(expected, rel=1e-12)

    def test_not_a_mass_point(self):
        est = mass_estimate(constant(0.6j), -1.0, 400)
        assert not est.converged

    def test_infinite_needs_terms(self):
        with pytest.raises(UsageError):
            mass_at(constant(0.5j), 1.0)

    def test_candidate_off_circle(self):
        with pytest.raises(DomainError):
            mass_at(constant(0.5j), 0.5, 10)


class TestGeronimus:
    @pytest.mark.parametrize("a", [0.6j, 0.3 - 0.4j, -0.5 + 0.1j, 0.9 * np.exp(0.3j)])
    def test_closed_form_matches_recurrence(self, a, rng):
        z = np.exp(1j * rng.uniform(0, 2 * np.pi, 50)) * rng.uniform(0.9, 1.1, 50)
        phi, _ = eval_op(constant(a), z, 30)
        for n in (0, 1, 5, 30):
            closed = geronimus_phi(a, z, n)
            np.testing.assert_allclose(closed, phi[n], rtol=1e-10)

    def test_mass_point_condition(self):
        assert geronimus_mass_point(0.6j) == pytest.approx((1 - 0.6j) / (1 + 0.6j))
        assert geronimus_mass_point(0.5) is None
        with pytest.raises(DomainError):
            geronimus_mass_point(0)

    def test_double_root(self):
        # w1 == w2 when (z+1)^2 = 4 rho^2 z; the limit form must stay finite
        a = 0.6j
        r2 = 1 - abs(a) ** 2
        disc_zero = np.roots([1, 2 - 4 * r2, 1])
        z = disc_zero[0]
        phi, _ = eval_op(constant(a), np.array([z]), 6)
        assert geronimus_phi(a, z, 6) == pytest.approx(phi[6, 0], rel=1e-8)


class TestSmallCases:
    def test_zero_parameters_state(self):
        z = 0.3 - 0.7j
        state = PolyState.initial(z)
        assert (state.phi, state.phi_star, state.kappa) == (1, 1, 1)
        for n in range(1, 6):
            state = advance_poly(state, 0.0)
            assert state.phi == pytest.approx(z**n)
            assert state.phi_star == 1
            assert state.kappa == 1

    def test_advance_against_closed_form(self):
        state = PolyState.initial(1.0)
        for _ in range(3):
            state = advance_poly(state, 0.6j)
        assert state.phi == pytest.approx(geronimus_phi(0.6j, 1.0, 3), rel=1e-13)

    def test_advance_names_index(self):
        state = advance_poly(PolyState.initial(1.0), 0.2)
        with pytest.raises(DomainError) as info:
            advance_poly(state, 1.0)
        assert info.value.index == 2

    def test_state_path_is_bitwise_equal(self, rng):
        seq = random_finite(rng, 30)
        z = complex(np.exp(0.9j))
        phi, phs = eval_op(seq, np.array([z]), 29)
        phi, phs = phi[:, 0], phs[:, 0]
        states = [PolyState.initial(z)]
        for n, a in enumerate(seq.coefficients(29), start=1):
            states.append(advance_poly(states[-1], a))
            assert (states[n].phi, states[n].phi_star) == (phi[n], phs[n])
        rebuilt = laurent_from_op(
            np.array([s.phi for s in states]), np.array([s.phi_star for s in states]), np.array(z)
        )
        chi = eval_olp(seq, np.array([z]), 29)[:, 0]
        assert np.array_equal(rebuilt, chi)

    def test_laurent_zero_parameters(self):
        z = np.exp(1j * np.array([0.4, 2.5]))
        chi = eval_olp(SchurSeq.infinite(), z, 7)
        for k in range(4):
            np.testing.assert_allclose(chi[2 * k], z ** -k, atol=1e-15)
            np.testing.assert_allclose(chi[2 * k + 1], z ** (k + 1), atol=1e-15)

    def test_laurent_starts_at_one(self, rng):
        chi = eval_olp(random_finite(rng, 5), np.array([0.2 + 3j]), 4)
        assert chi[0, 0] == 1

    def test_laurent_moduli_at_mass_point(self):
        lam = geronimus_mass_point(0.6j)
        seq = constant(0.6j)
        chi = eval_olp(seq, np.array([lam]), 200)
        phi, _ = eval_op(seq, np.array([lam]), 200)
        assert np.sum(np.abs(chi) ** 2) == pytest.approx(np.sum(np.abs(phi) ** 2), rel=1e-10)

    @pytest.mark.parametrize("N", [1, 2, 5])
    def test_psi_zero_interior(self, N):
        u = np.exp(0.8j)
        psi = para_orthogonal_psi(SchurSeq.finite(np.zeros(N - 1), u))
        expected = np.zeros(N + 1, dtype=complex)
        expected[0], expected[-1] = u, 1
        np.testing.assert_allclose(psi, expected, atol=1e-15)

    @given(st.integers(1, 12), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_psi_roots_simple_on_circle(self, N, seed):
        seq = random_finite(np.random.default_rng(seed), N)
        roots = np.roots(para_orthogonal_psi(seq)[::-1])
        np.testing.assert_allclose(np.abs(roots), 1.0, atol=1e-8)
        if N > 1:
            gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(N)
            assert gaps.min() > 1e-8

    @pytest.mark.parametrize("N", [1, 3, 8])
    def test_equal_masses(self, N):
        u = np.exp(-0.3j)
        seq = SchurSeq.finite(np.zeros(N - 1), u)
        lam = (-u) ** (1 / N) * np.exp(2j * np.pi * np.arange(N) / N)
        for z in lam:
            assert mass_at(seq, z) == pytest.approx(1 / N)

    def test_geronimus_mass_converges(self):
        lam = geronimus_mass_point(0.6j)
        assert mass_at(constant(0.6j), lam, 400) == pytest.approx(mass_at(constant(0.6j), lam, 800), abs=1e-8)

    def test_geronimus_point_value(self):
        assert geronimus_mass_point(0.6j) == pytest.approx((0.64 - 1.2j) / 1.36)

    @given(disk_point)
    def test_geronimus_point_unimodular(self, a):
        if a == 0 or a.real >= abs(a) ** 2:
            return
        assert abs(geronimus_mass_point(a)) == pytest.approx(1.0)

    @given(disk_point, st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
    def test_geronimus_degree_zero(self, a, z):
        assert geronimus_phi(a, z, 0) == pytest.approx(1.0)

    def test_geronimus_small_degrees(self):
        z = 0.3 + 0.4j
        phi, _ = eval_op(constant(0.6j), np.array([z]), 10)
        for n in range(11):
            assert abs(geronimus_phi(0.6j, z, n) - phi[n, 0]) < 1e-12

    @pytest.mark.parametrize("theta", [0.3, 1.7, 3.0, 5.5])
    def test_geronimus_u_phase(self, theta):
        w1, w2 = geronimus_w(0.6j, np.exp(1j * theta))
        for n in range(1, 12):
            u = geronimus_u(w1, w2, n) * np.exp(-0.5j * (n - 1) * theta)
            assert abs(u.imag) <= 1e-12 * max(1.0, abs(u))


class TestInvariants:
    @given(finite_seq(), st.floats(0, 2 * math.pi))
    @settings(max_examples=50, deadline=None)
    def test_reversed_modulus(self, seq, theta):
        phi, phs = eval_op(seq, np.exp(1j * theta), seq.order - 1)
        np.testing.assert_allclose(np.abs(phs), np.abs(phi), rtol=1e-13)

    def test_kappa_against_state(self, rng):
        seq = SchurSeq.infinite(lambda n: 0.9 * np.exp(1j * np.sqrt(n)) / np.sqrt(n), name="slow")
        state = PolyState.initial(1.0)
        k = kappa(seq, 100)
        for n, a in enumerate(seq.coefficients(100), start=1):
            state = advance_poly(state, a)
            assert k[n] == pytest.approx(state.kappa, rel=1e-13)

    def test_geronimus_closed_form_bulk(self, rng):
        bad = 0
        for _ in range(10_000):
            a = rng.uniform(0, 0.95) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            z = rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            n = int(rng.integers(0, 21))
            phi, _ = eval_op(constant(a), np.array([z]), n)
            ref = phi[n, 0]
            bad += abs(geronimus_phi(a, z, n) - ref) > 1e-10 * max(abs(ref), 1e-300)
        assert bad == 0
