import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings, strategies as st

from susylloyd import grassmann as gr
from susylloyd.suites import polar_test_integrands, shell_integrand
from susylloyd.superpolar import (PreconditionError, SusyIntegrand, UnsupportedScaleError, bump_integrand,
                                  chi_index, chibar_index, flat_integral, flat_vector, g2_oracle, gaussian_integrand,
                                  measure, polar_decomposition, polar_vector, verify_g2_single_site,
                                  verify_susy_representation)

E1 = math.exp(-1)


def test_generator_layout():
    assert measure([1, 0]) == [chibar_index(0), chi_index(0), chibar_index(1), chi_index(1)] == [1, 2, 3, 4]


def test_flat_vector_norm_body():
    sv = flat_vector([np.array([1 + 1j, 2.0])])
    x = sv.norm2(0)
    assert np.allclose(x.body, [2, 4]) and x.parity() == 0


@pytest.mark.parametrize("n", [1, 2])
def test_polar_substitution_gives_r_squared(n):
    rng = np.random.default_rng(1)
    r = [rng.uniform(0.01, 4, 50) for _ in range(n)]
    th = [rng.uniform(0, 2 * np.pi, 50) for _ in range(n)]
    sv = polar_vector((0,) * n, r, th)
    for j in range(n):
        x = sv.norm2(j)
        assert np.max(np.abs(x.body - r[j] ** 2) / r[j] ** 2) < 1e-14
        for m, c in x.terms.items():
            if m:
                assert np.max(np.abs(c)) < 1e-14


def test_polar_alpha_one_sites_vanish():
    sv = polar_vector((1, 0), [np.ones(3), np.ones(3)], [np.zeros(3), np.zeros(3)])
    assert sv.z[0].is_zero() and sv.chi[0].is_zero() and sv.chibar[0].is_zero()
    assert not sv.z[1].is_zero()


class TestFlatIntegral:
    def test_gaussian(self):
        assert abs(flat_integral(gaussian_integrand([[1.0]])).value - 1) < 1e-10

    def test_resolvent_entry(self):
        f = gaussian_integrand([[1.0]], prefactor=lambda sv: sv.zbar[0] * sv.z[0])
        assert abs(flat_integral(f).value - 1) < 1e-10

    def test_bump_against_radial_oracle(self):
        # flat integral reduces to -∫ phi'(x) dx over the body
        def dphi(x):
            s = 1 - 2 * x * x
            return math.exp(-1 / s) * (-4 * x / s ** 2) if s > 0 else 0.0

        oracle = -scipy.integrate.quad(dphi, 0, 2 ** -0.5, epsabs=0, epsrel=1e-13)[0]
        assert abs(oracle - E1) < 1e-12
        assert abs(flat_integral(bump_integrand()).value - E1) < 1e-9

    def test_too_many_sites(self):
        with pytest.raises(UnsupportedScaleError):
            flat_integral(gaussian_integrand(np.eye(3)))


class TestPolarDecomposition:
    def test_bump_split(self):
        dec = polar_decomposition(bump_integrand())
        assert abs(dec.terms[(0,)]) < 1e-10
        assert abs(dec.terms[(1,)] - E1) < 1e-14
        assert abs(dec.total - E1) < 1e-10

    def test_bump_variant_with_linear_argument(self):
        # phi(x) = exp(-1/(1-2x)) on x < 1/2 gives the same e^{-1}
        def derivs(order):
            def phi(x, k):
                x = np.real(np.asarray(x))
                s = 1 - 2 * x
                ok = s > 0
                p = np.where(ok, np.exp(-1 / np.where(ok, s, 1)), 0.0)
                return p if k == 0 else np.where(ok, p * (-2) / np.where(ok, s, 1) ** 2, 0.0)

            return [lambda b, k=k: phi(b, k) for k in range(order)]

        f = SusyIntegrand(lambda sv: gr.lift_function(derivs(2), sv.norm2()), 1, "bump2", radial_cutoff=2 ** -0.5)
        dec = polar_decomposition(f)
        assert abs(dec.terms[(0,)]) < 1e-10 and abs(dec.total - E1) < 1e-10
        assert abs(flat_integral(f).value - E1) < 1e-8

    def test_gaussian_split(self):
        dec = polar_decomposition(gaussian_integrand([[1.0]]))
        assert abs(dec.terms[(0,)]) < 1e-12 and abs(dec.terms[(1,)] - 1) < 1e-14

    def test_weighted_gaussian_split(self):
        f = gaussian_integrand([[1.0]], prefactor=lambda sv: sv.zbar[0] * sv.z[0])
        dec = polar_decomposition(f)
        # α=0 term reduces to ∫ 2 r^3 e^{-r^2} dr
        oracle = scipy.integrate.quad(lambda r: 2 * r ** 3 * math.exp(-r * r), 0, np.inf)[0]
        assert abs(dec.terms[(0,)] - oracle) < 1e-10 and abs(dec.terms[(1,)]) < 1e-14

    @pytest.mark.parametrize("name,f", polar_test_integrands())
    def test_sum_equals_flat(self, name, f):
        flat = flat_integral(f).value
        assert abs(polar_decomposition(f).total - flat) < 1e-6 * (1 + abs(flat))

    def test_compact_support_away_from_origin(self):
        dec = polar_decomposition(shell_integrand())
        for alpha, v in dec.terms.items():
            if alpha != (0,):
                assert abs(v) < 1e-10
        assert abs(dec.terms[(0,)] - flat_integral(shell_integrand()).value) < 1e-8


class TestSusyRepresentation:
    def test_identity(self):
        r = verify_susy_representation(np.eye(1), np.eye(1))
        assert r["passed"] and abs(r["det_ratio"]["integral"] - 1) < 1e-10

    def test_ratio(self):
        r = verify_susy_representation([[2.0]], [[3.0]])
        assert abs(r["det_ratio"]["integral"] - 1.5) < 1e-9
        assert abs(r["inverse_entries"][(0, 0)]["integral"] - 0.5) < 1e-9

    def test_random_2x2(self):
        rng = np.random.default_rng(7)
        A1 = 1.5 * np.eye(2) + 0.3 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
        A2 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        r = verify_susy_representation(A1, A2)
        assert r["passed"] and r["max_rel_err"] < 1e-8

    def test_normalisation(self):
        A = np.array([[1.0, 0.4j], [0.2, 2.0 - 0.5j]])
        r = verify_susy_representation(A, A)
        assert abs(r["det_ratio"]["integral"] - 1) < 1e-9

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            verify_susy_representation([[-1.0]], [[1.0]])
        with pytest.raises(UnsupportedScaleError):
            verify_susy_representation(np.eye(3), np.eye(3))


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(0.05, 3), st.floats(0.0, 3))
def test_g2_oracle_closed_form(E, eps, lam):
    # Lorentzians convolve: E|E+iε-λv|^{-2} = (ε+λ) / (ε (E² + (ε+λ)²))
    closed = (eps + lam) / (eps * (E * E + (eps + lam) ** 2))
    assert abs(g2_oracle(E, eps, lam) - closed) < 1e-9 * closed


class TestG2:
    def test_no_disorder(self):
        r = verify_g2_single_site(0.5, 1.0, 0.0)
        assert abs(r["polar"] - 1 / (0.25 + 1)) < 1e-8

    def test_unit_parameters(self):
        r = verify_g2_single_site(0.0, 1.0, 1.0)
        assert r["passed"] and abs(r["oracle"] - 0.5) < 1e-12

    def test_scale(self):
        with pytest.raises(UnsupportedScaleError):
            verify_g2_single_site(0.0, 1.0, 1.0, n_sites=2)
        with pytest.raises(PreconditionError):
            verify_g2_single_site(0.0, 0.0, 1.0)
