import math

import numpy as np
import pytest

from susylloyd.disorder import DisorderModel, nearest_neighbour_correlation
from susylloyd.lattice import LatticeSpec, build_laplacian
from susylloyd.lloyd import (BETAS, ToymodelBlocks, UsageError, combes_thomas_check, default_pair, exact_genfun,
                             exact_trace, region_integral, region_integral_reduced, remainder, remainder_reduced,
                             schur_bounds_check, shifted_trace, toymodel_decomposition, toymodel_error_sweep,
                             toymodel_oracle, trace_constant_sweep, x_form_check)
from susylloyd.mc import McPlan, mc_average
from susylloyd.resolvent import SpectralProbe
from susylloyd.superpolar import UnsupportedScaleError

TWO = LatticeSpec(1, 2)


class TestExactFormulas:
    def test_single_site(self):
        spec = LatticeSpec(1, 1)
        v = exact_trace(spec, DisorderModel.iid(1), 0.3, 0.1, 0.7)
        assert abs(v - 1 / complex(0.3, 0.8)) < 1e-15

    def test_scaled_correlation_doubles_shift(self):
        spec = LatticeSpec(1, 6, "periodic")
        a = exact_trace(spec, DisorderModel.nonneg(2 * np.eye(6)), 1.0, 0.1, 0.5)
        b = exact_trace(spec, DisorderModel.iid(6), 1.0, 0.1, 1.0)
        assert abs(a - b) < 1e-14

    def test_far_energy(self):
        spec = LatticeSpec(2, 3)
        E = 1e4
        # Tr (E - H0)^-1 ≈ N/E + Tr H0/E²
        approx = 9 / E + np.trace(build_laplacian(spec).matrix) / E ** 2
        assert abs(exact_trace(spec, DisorderModel.iid(9), E, 0.0, 1e-3) - approx) < 1e-6 * 9 / E

    def test_iid_equals_identity_correlation(self):
        spec = LatticeSpec(1, 5)
        assert exact_trace(spec, DisorderModel.iid(5), 0.5, 0.2, 1.0) == \
            exact_trace(spec, DisorderModel.nonneg(np.eye(5)), 0.5, 0.2, 1.0)

    def test_eps_zero_allowed(self):
        spec = LatticeSpec(1, 4)
        assert np.isfinite(exact_trace(spec, DisorderModel.iid(4), 0.0, 0.0, 1.0))

    def test_toymodel_rejected(self):
        with pytest.raises(UsageError):
            exact_trace(LatticeSpec(1, 4), DisorderModel.toymodel(4, 0.2, (1, 2)), 0.0, 0.1, 1.0)
        with pytest.raises(UsageError):
            exact_genfun(LatticeSpec(1, 4), DisorderModel.toymodel(4, 0.2, (1, 2)), 0.0, 1.0, 0.1, 1.0)

    def test_genfun_examples(self):
        spec = LatticeSpec(1, 1)
        m = DisorderModel.iid(1)
        assert abs(exact_genfun(spec, m, 0.4, 0.4, 0.0, 1.0) - 1) < 1e-15
        assert abs(exact_genfun(spec, m, 0.4, -1.0, 0.0, 1.0) - complex(0.4, 1) / complex(-1.0, 1)) < 1e-15

    @pytest.mark.parametrize("model", ["iid", "nonneg"])
    def test_genfun_derivative_is_trace(self, model):
        spec = LatticeSpec(1, 8, "periodic")
        m = DisorderModel.iid(8) if model == "iid" else nearest_neighbour_correlation(spec, 0.5)
        E, h = 0.7, 1e-5
        fd = -(exact_genfun(spec, m, E, E + h, 0.1, 1.0) - exact_genfun(spec, m, E, E - h, 0.1, 1.0)) / (2 * h)
        tr = exact_trace(spec, m, E, 0.1, 1.0)
        assert abs(fd - tr) < 1e-6 * abs(tr)


class TestToymodelOracle:
    def test_decoupled_limit(self):
        spec = LatticeSpec(1, 8, "periodic")
        v = toymodel_oracle(spec, 0.0, 1.0, 0.1, 1.0).value
        assert abs(v - exact_trace(spec, DisorderModel.iid(8), 1.0, 0.1, 1.0)) < 1e-8

    @pytest.mark.parametrize("delta", [0.0, 0.2, 0.4])
    def test_methods_agree(self, delta):
        spec = LatticeSpec(1, 8)
        a = toymodel_oracle(spec, delta, 0.5, 0.1, 1.0, method="cubature").value
        b = toymodel_oracle(spec, delta, 0.5, 0.1, 1.0, method="contour").value
        assert abs(a - b) < 1e-9 * abs(a)

    def test_matches_monte_carlo_on_two_sites(self):
        model = DisorderModel.toymodel(2, 0.3, (0, 1))
        est = mc_average(McPlan(100_000, 3), TWO, model, SpectralProbe(0.0, 0.1, 1.0))
        oracle = toymodel_oracle(TWO, 0.3, 0.0, 0.1, 1.0, (0, 1)).value
        assert est.within(oracle)[0]

    def test_smooth_in_delta(self):
        spec = LatticeSpec(1, 8)
        ds = np.array([0.0, 0.05, 0.1, 0.15, 0.2])
        vals = np.array([toymodel_oracle(spec, d, 1.0, 0.1, 1.0).value for d in ds])
        # even in delta: a + b δ² + c δ⁴ fits to quadrature accuracy
        X = np.stack([np.ones_like(ds), ds ** 2, ds ** 4], axis=1)
        coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
        assert np.max(np.abs(X @ coef - vals)) < 1e-6 * abs(vals[0])

    def test_pair_must_be_neighbours(self):
        with pytest.raises(UsageError):
            toymodel_oracle(LatticeSpec(1, 6), 0.2, 0.0, 0.1, 1.0, (0, 2))
        with pytest.raises(UsageError):
            toymodel_oracle(LatticeSpec(1, 6), 0.2, 0.0, 0.1, 1.0, method="simpson")

    def test_default_pair(self):
        spec = LatticeSpec(2, 5)
        i, j = default_pair(spec)
        assert j == spec.center and spec.distance(i, j) == 1


class TestBlocks:
    def test_schur_determinant_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            spec = LatticeSpec(int(rng.integers(1, 3)), int(rng.integers(3, 6)), "restriction")
            b = ToymodelBlocks.build(spec, rng.uniform(0.05, 0.5), rng.uniform(0.3, 2), rng.uniform(0, 4))
            for beta in BETAS:
                lhs = np.linalg.det(b.C(beta))
                rhs = np.linalg.det(b.B) * np.linalg.det(b.S(beta))
                assert abs(lhs - rhs) < 1e-10 * abs(lhs)

    def test_x_body_and_form(self):
        b = ToymodelBlocks.build(LatticeSpec(1, 10), 0.3, 1.5, 0.5)
        assert np.allclose(b.X(), 2 * 1.5 * np.diag([-1, 0.09]), atol=1e-14)
        assert x_form_check(b)["passed"]

    def test_decoupled_real_part(self):
        b = ToymodelBlocks.build(LatticeSpec(1, 10), 0.0 + 1e-300, 1.3, 0.5)
        assert np.allclose(b.A["++"].real, 1.3 * np.eye(2))
        assert np.all(np.linalg.eigvalsh(0.5 * (b.B + b.B.conj().T)) > 0)

    def test_two_site_blocks_are_empty(self):
        b = ToymodelBlocks.build(TWO, 0.2, 1.0, 0.0)
        assert b.B.shape == (0, 0) and np.allclose(b.M(), np.eye(2))
        assert np.allclose(b.S("++"), b.A["++"])

    def test_v_theta(self):
        b = ToymodelBlocks.build(TWO, 0.2, 1.0, 0.0)
        assert np.allclose(b.v(0.0, np.pi / 2), [0.2, 1j])


class TestDecomposition:
    @pytest.mark.parametrize("delta", [0.1, 0.3])
    def test_matches_oracle(self, delta):
        dec = toymodel_decomposition(TWO, delta, 1.0, 0.0)
        oracle = toymodel_oracle(TWO, delta, 0.0, 0.0, 1.0, (0, 1), method="contour").value
        assert abs(dec.trace - oracle) < 1e-4 * abs(oracle)
        assert abs(dec.total - 1j * oracle) < 1e-4 * abs(oracle)

    @pytest.mark.parametrize("delta,E,eps", [(0.2, 0.0, 0.0), (0.3, 1.0, 0.2), (0.05, -0.5, 0.0)])
    def test_reduced_forms_close_the_identity(self, delta, E, eps):
        b = ToymodelBlocks.build(TWO, delta, 1.0, E, eps, (0, 1))
        total = sum(region_integral_reduced(b, beta) for beta in BETAS) + remainder_reduced(b)
        oracle = toymodel_oracle(TWO, delta, E, eps, 1.0, (0, 1), method="contour").value
        assert abs(-1j * total - oracle) < 1e-10 * abs(oracle)

    def test_region_and_boundary_quadratures_match_reduced(self):
        b = ToymodelBlocks.build(TWO, 0.25, 1.0, 0.3, 0.0, (0, 1))
        for beta in BETAS:
            assert abs(region_integral(b, beta).value - region_integral_reduced(b, beta)) < 1e-7
        assert abs(remainder(b).value - remainder_reduced(b)) < 1e-9

    def test_remainder_order_delta_squared(self):
        ds = [0.1, 0.2, 0.3]
        R = [abs(remainder_reduced(ToymodelBlocks.build(TWO, d, 1.0, 0.0, 0.0, (0, 1)))) for d in ds]
        c = [r / d ** 2 for r, d in zip(R, ds)]
        assert max(c) / min(c) < 1.5
        slope = np.polyfit(np.log(ds), np.log(R), 1)[0]
        assert abs(slope - 2) < 0.2

    def test_small_delta_approaches_iid(self):
        b = ToymodelBlocks.build(TWO, 0.02, 1.0, 0.0, 0.0, (0, 1))
        total = sum(region_integral_reduced(b, beta) for beta in BETAS) + remainder_reduced(b)
        iid = exact_trace(TWO, DisorderModel.iid(2), 0.0, 0.0, 1.0)
        assert abs(-1j * total - iid) < 5e-3 * abs(iid)

    def test_two_sites_only(self):
        with pytest.raises(UnsupportedScaleError):
            toymodel_decomposition(LatticeSpec(1, 3), 0.2, 1.0, 0.0)
        with pytest.raises(UsageError):
            toymodel_decomposition(TWO, 0.0, 1.0, 0.0)


class TestSweep:
    def test_zero_delta_is_floor(self):
        r = toymodel_error_sweep(LatticeSpec(1, 8), [0.0], 1.0, 1.0)
        assert r.deviations[0] == r.floor < 1e-12 and math.isnan(r.slope)

    def test_slope_and_volume_dependence(self):
        small = toymodel_error_sweep(LatticeSpec(1, 8), [0.1, 0.2], 1.0, 1.0)
        large = toymodel_error_sweep(LatticeSpec(1, 16), [0.1, 0.2], 1.0, 1.0)
        assert abs(small.slope - 2) < 0.4 and abs(large.slope - 2) < 0.4
        assert large.deviations[1] < small.deviations[1]


class TestBounds:
    def test_combes_thomas_example(self):
        r = combes_thomas_check(LatticeSpec(1, 16), 1.0, 0.0, 1.0)
        assert r["passed"] and r["diagonal_max"] <= 2.0

    @pytest.mark.parametrize("d,L,bc", [(1, 8, "periodic"), (2, 4, "restriction"), (2, 6, "periodic")])
    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_combes_thomas_grid(self, d, L, bc, lam):
        for E in (0.0, 2.0 * d, 4.0 * d):
            assert combes_thomas_check(LatticeSpec(d, L, bc), lam, E, 1.0)["passed"]

    def test_schur_example(self):
        r = schur_bounds_check(LatticeSpec(1, 16), 0.25, 1.0, 0.0)
        assert r["passed"] and min(r["hermitian_eigenvalues"]) >= 0.5

    def test_schur_delta_range(self):
        with pytest.raises(UsageError):
            schur_bounds_check(LatticeSpec(1, 8), 0.6, 1.0, 0.0)
        with pytest.raises(UsageError):
            combes_thomas_check(LatticeSpec(1, 8), 1.0, 0.0, 0.0)

    def test_trace_constant_stable(self):
        r = trace_constant_sweep(1, (8, 16, 32), 0.25, 1.0, 1.0)
        assert r["passed"] and r["spread"] < 2
