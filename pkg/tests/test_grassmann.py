import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from susylloyd import grassmann as gr
from susylloyd.grassmann import GrassmannElement as G


def gen(q, i):
    return G.generator(q, i)


def random_element(rng, q, density=0.5, parity=None):
    terms = {}
    for mask in range(1 << q):
        if parity is not None and bin(mask).count("1") % 2 != parity:
            continue
        if rng.random() < density:
            terms[mask] = rng.normal() + 1j * rng.normal()
    return G(q, terms)


def brute_product(a, b):
    """Product by explicit reordering of generator lists (bubble sort sign count)."""
    out = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            seq = [i for i in range(a.q) if ma >> i & 1] + [i for i in range(a.q) if mb >> i & 1]
            if len(set(seq)) < len(seq):
                continue
            sign = 1
            for x, y in itertools.combinations(range(len(seq)), 2):
                if seq[x] > seq[y]:
                    sign = -sign
            m = ma | mb
            out[m] = out.get(m, 0) + sign * ca * cb
    return G(a.q, out)


class TestWedge:
    def test_ordered(self):
        p = gen(2, 1) * gen(2, 2)
        assert p.terms == {0b11: 1}

    def test_anticommute(self):
        assert (gen(2, 2) * gen(2, 1)).terms == {0b11: -1}

    def test_one_plus_chi_squared(self):
        a = 1 + gen(2, 1)
        assert (a * a) == G(2, {0: 1, 1: 2})
        assert (a * a) == brute_product(a, a)

    def test_mismatched_algebras(self):
        with pytest.raises(gr.GrassmannError):
            gen(2, 1) * gen(3, 1)

    def test_generator_range(self):
        with pytest.raises(gr.GrassmannError):
            gen(3, 4)
        with pytest.raises(gr.GrassmannError):
            G(65)

    def test_no_explicit_zeros(self):
        a = gen(3, 1) - gen(3, 1)
        assert a.is_zero() and a.terms == {}

    @given(st.integers(1, 8), st.integers(1, 8))
    def test_odd_monomials_anticommute(self, i, j):
        q = 8
        u, v = gen(q, i), gen(q, j)
        assert u * v == -(v * u)
        assert (u * u).is_zero()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_associative_bilinear_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        q = int(rng.integers(1, 11))
        a, b, c = (random_element(rng, q, density=3.0 / (1 << min(q, 6))) for _ in range(3))
        assert (a * b).allclose(brute_product(a, b), atol=1e-12)
        assert ((a * b) * c).allclose(a * (b * c), atol=1e-10)
        assert (a * (2 * b + c)).allclose(2 * (a * b) + a * c, atol=1e-10)

    def test_parity_and_body(self):
        a = 2 + gen(4, 1) * gen(4, 2)
        assert a.parity() == 0 and a.body == 2
        assert gen(4, 3).parity() == 1
        assert (1 + gen(4, 3)).parity() is None

    def test_array_coefficients_match_scalar(self):
        x = np.array([0.5, 1.5, -2.0])
        a = G(2, {0: x, 0b11: x ** 2})
        b = G(2, {0b01: 1.0, 0b10: x})
        batch = a * b
        for k in range(3):
            s = G(2, {0: x[k], 0b11: x[k] ** 2}) * G(2, {0b01: 1.0, 0b10: x[k]})
            for m, c in s.terms.items():
                assert np.isclose(batch.terms[m][k], c)


class TestDerivatives:
    def test_left(self):
        m = gen(2, 1) * gen(2, 2)
        assert gr.derivative_left(m, 1) == gen(2, 2)
        assert gr.derivative_left(m, 2) == -gen(2, 1)

    def test_right(self):
        m = gen(2, 1) * gen(2, 2)
        assert gr.derivative_right(m, 2) == gen(2, 1)
        assert gr.derivative_right(m, 1) == -gen(2, 2)

    def test_range(self):
        with pytest.raises(gr.GrassmannError):
            gr.derivative_left(gen(2, 1), 3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
    def test_left_by_explicit_reordering(self, seed, j):
        # chi_j * d_left(a) reproduces the part of a containing chi_j
        rng = np.random.default_rng(seed)
        a = random_element(rng, 6, 0.3)
        part = G(6, {m: c for m, c in a.terms.items() if m >> (j - 1) & 1})
        assert (gen(6, j) * gr.derivative_left(a, j)).allclose(part)
        assert (gr.derivative_right(a, j) * gen(6, j)).allclose(part)


class TestBerezin:
    def test_pair_sign(self):
        for i, j in ((1, 2), (2, 1), (1, 3)):
            assert gr.berezin(gen(3, i) * gen(3, j), [i, j]).body == -1

    def test_constant(self):
        assert gr.berezin(G.scalar(2, 3.0), [1]).is_zero()

    def test_single_pair_gaussian(self):
        m = 2.5 - 0.5j
        chibar, chi = gen(2, 1), gen(2, 2)
        assert np.isclose(gr.top_coefficient(gr.exp(-m * (chibar * chi)), [1, 2]), m)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5))
    def test_result_independent_of_generator(self, seed, j):
        rng = np.random.default_rng(seed)
        a = random_element(rng, 5, 0.4)
        assert gr.derivative_left(gr.berezin(a, [j]), j).is_zero()


class TestGaussian:
    def test_identity(self):
        assert np.isclose(gr.grassmann_gaussian(np.eye(2)), 1)

    def test_cofactor(self):
        assert abs(gr.grassmann_gaussian([[1, 2], [3, 4]]) - (-2)) < 1e-14

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
    def test_equals_lu_determinant(self, seed, n):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert abs(gr.grassmann_gaussian(M) - np.linalg.det(M)) < 1e-12


class TestLift:
    def test_exp_of_one_plus_pair(self):
        a = 1 + gen(2, 1) * gen(2, 2)
        assert gr.exp(a).allclose(math.e * a, atol=1e-15)

    def test_exp_truncates_at_third_power(self):
        q = 4
        n = gen(q, 1) * gen(q, 2) - gen(q, 3) * gen(q, 4)
        assert gr.nilpotency_order(n) == 3
        assert (n ** 3).is_zero() and not (n ** 2).is_zero()
        assert gr.exp(n).allclose(1 + n + 0.5 * n * n)

    def test_identity_function(self):
        a = 0.3 + gen(4, 1) * gen(4, 2) + 2 * gen(4, 2) * gen(4, 3)
        ident = [lambda b: b, lambda b: 1.0, lambda b: 0.0]
        assert gr.lift_function(ident, a).allclose(a)

    def test_errors(self):
        with pytest.raises(gr.GrassmannError):
            gr.lift_function([np.exp], gen(2, 1))
        n = gen(4, 1) * gen(4, 2) + gen(4, 3) * gen(4, 4)
        with pytest.raises(gr.GrassmannError):
            gr.lift_function([np.exp, np.exp], n)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_exp_homomorphism_disjoint_generators(self, seed):
        rng = np.random.default_rng(seed)
        q = 8
        a = rng.normal() + sum(rng.normal() * gen(q, i) * gen(q, j) for i, j in ((1, 2), (3, 4), (1, 4)))
        b = rng.normal() + sum(rng.normal() * gen(q, i) * gen(q, j) for i, j in ((5, 6), (7, 8), (6, 7)))
        assert gr.exp(a + b).allclose(gr.exp(a) * gr.exp(b), atol=1e-10)

    def test_inverse(self):
        a = 2 + gen(4, 1) * gen(4, 2) + 0.5j * gen(4, 3) * gen(4, 4)
        assert (a * gr.inverse(a)).allclose(1.0, atol=1e-14)
        with pytest.raises(gr.SingularBodyError):
            gr.inverse(gen(4, 1) * gen(4, 2))


def scal(q, x):
    return G.scalar(q, x)


def random_supermatrix(rng, p, r, q, odd_gens):
    """Even blocks with invertible bodies plus nilpotent even parts, odd blocks from ``odd_gens``."""

    def even():
        e = scal(q, rng.normal() + 1j * rng.normal())
        i, j = rng.choice(odd_gens, 2, replace=False)
        return e + (rng.normal() * gen(q, int(i))) * gen(q, int(j))

    def odd():
        return sum((rng.normal() * gen(q, int(i)) for i in odd_gens), G(q))

    a = [[even() + (3 if i == k else 0) for k in range(p)] for i in range(p)]
    b = [[even() + (3 if i == k else 0) for k in range(r)] for i in range(r)]
    sigma = [[odd() for _ in range(r)] for _ in range(p)]
    rho = [[odd() for _ in range(p)] for _ in range(r)]
    return gr.SuperMatrix(a, sigma, rho, b)


class TestSdet:
    def test_block_diagonal(self):
        q = 2
        a = [[scal(q, 2), scal(q, 1)], [scal(q, 0.5), scal(q, 3)]]
        b = [[scal(q, 4)]]
        S = gr.SuperMatrix(a, [[G(q)], [G(q)]], [[G(q), G(q)]], b)
        assert np.isclose(gr.sdet(S).body, (6 - 0.5) / 4)

    def test_scalar(self):
        S = gr.SuperMatrix([[scal(2, 2)]], [[G(2)]], [[G(2)]], [[scal(2, 1)]])
        assert gr.sdet(S) == scal(2, 2)

    def test_nilpotent_off_diagonal(self):
        q = 2
        S = gr.SuperMatrix([[scal(q, 1)]], [[gen(q, 1)]], [[gen(q, 2)]], [[scal(q, 1)]])
        assert gr.sdet(S).allclose(1 - gen(q, 1) * gen(q, 2))

    def test_singular_b(self):
        S = gr.SuperMatrix([[scal(2, 1)]], [[gen(2, 1)]], [[gen(2, 2)]], [[G(2)]])
        with pytest.raises(gr.SingularBodyError):
            gr.sdet(S)

    def test_parity_checked(self):
        with pytest.raises(gr.GrassmannError):
            gr.SuperMatrix([[gen(2, 1)]], [[G(2)]], [[G(2)]], [[scal(2, 1)]])

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 2]))
    def test_multiplicative(self, seed, p):
        rng = np.random.default_rng(seed)
        q = 6
        S1 = random_supermatrix(rng, p, p, q, [1, 2, 3, 4, 5, 6])
        S2 = random_supermatrix(rng, p, p, q, [1, 2, 3, 4, 5, 6])
        lhs = gr.sdet(S1 @ S2)
        rhs = gr.sdet(S1) * gr.sdet(S2)
        assert lhs.allclose(rhs, atol=1e-9, rtol=1e-9)
