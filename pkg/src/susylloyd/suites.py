"""Named verification suites shared by the command line and the tests.

Each check returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np

from . import grassmann as gr
from .lattice import LatticeSpec
from .lloyd import (ToymodelBlocks, combes_thomas_check, schur_bounds_check, toymodel_decomposition,
                    toymodel_oracle, trace_constant_sweep, x_form_check)
from .superpolar import (SusyIntegrand, bump_integrand, flat_integral, gaussian_integrand, polar_decomposition,
                         polar_vector, verify_g2_single_site, verify_susy_representation)


def _rand_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def grassmann_suite(seed: int = 0, count: int = 200) -> list:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(count):
        n = 1 + k % 4
        M = _rand_complex(rng, n, n)
        worst = max(worst, abs(gr.grassmann_gaussian(M) - np.linalg.det(M)))
    out = [("gaussian_equals_det", worst < 1e-12, f"max |err| {worst:.2e} over {count} matrices")]
    q = 4
    a = gr.GrassmannElement.generator(q, 1)
    b = gr.GrassmannElement.generator(q, 3)
    out.append(("anticommute", (a * b + b * a).is_zero(), "chi1 chi3 + chi3 chi1 = 0"))
    two = gr.berezin(gr.GrassmannElement.monomial(q, [1, 2]), [1, 2]).body
    out.append(("berezin_pair", abs(two + 1) < 1e-15, f"∫dχ1 dχ2 χ1χ2 = {two.real:g}"))
    # Berezinian of a (1|1) supermatrix with odd off-diagonal entries
    q = 2
    x = gr.GrassmannElement.generator(q, 1)
    y = gr.GrassmannElement.generator(q, 2)
    S = gr.SuperMatrix([[gr.GrassmannElement.scalar(q, 2.0)]], [[x]], [[y]],
                       [[gr.GrassmannElement.scalar(q, 3.0)]])
    expected = (gr.GrassmannElement.scalar(q, 2.0) - x * y * (1 / 3.0)) * (1 / 3.0)
    out.append(("sdet_1x1", gr.sdet(S).allclose(expected, atol=1e-15), "sdet = (a - σ b^-1 ρ)/b"))
    return out


def susy_suite(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    r = verify_susy_representation(np.eye(1), np.eye(1))
    out.append(("normalisation_1x1", r["passed"], f"rel err {r['max_rel_err']:.1e}"))
    r = verify_susy_representation([[2.0]], [[3.0]])
    out.append(("ratio_3_over_2", r["passed"], f"{r['det_ratio']['integral'].real:.12f}"))
    A1 = 2 * np.eye(2) + 0.4 * _rand_complex(rng, 2, 2)
    A2 = _rand_complex(rng, 2, 2)
    r = verify_susy_representation(A1, A2)
    out.append(("random_2x2", r["passed"], f"rel err {r['max_rel_err']:.1e}"))
    for E, eps, lam in ((0.0, 1.0, 0.0), (0.0, 1.0, 1.0), (0.7, 0.5, 1.5)):
        r = verify_g2_single_site(E, eps, lam)
        out.append((f"g2_E{E}_eps{eps}_lam{lam}", r["passed"], f"rel err {r['rel_err']:.1e}"))
    return out


def polar_test_integrands() -> list:
    """Integrands with known flat integrals for the decomposition identity."""
    A = np.array([[1.5, 0.3 - 0.2j], [0.1 + 0.4j, 1.2]])

    def quartic(sv):
        return sv.norm2(0) * sv.norm2(0) * gr.exp(-sv.norm2(0))

    return [
        ("gaussian_weighted_n1", gaussian_integrand([[1.3]], prefactor=lambda sv: sv.zbar[0] * sv.z[0])),
        ("quartic_n1", SusyIntegrand(quartic, 1, "quartic")),
        ("gaussian_weighted_n2", gaussian_integrand(A, prefactor=lambda sv: sv.zbar[1] * sv.z[0])),
        ("gaussian_n2", gaussian_integrand(A, 2 * A)),
    ]


def shell_integrand(a: float = 0.3, b: float = 0.9) -> SusyIntegrand:
    """``psi(Phi*Phi)`` with a bump ``psi`` supported in ``(a, b)``, vanishing near ``z = 0``."""

    def psi_derivs(x):
        x = np.real(x)
        inside = (x > a) & (x < b)
        u = np.where(inside, (x - a) * (b - x), 1.0)
        p = np.where(inside, np.exp(-1.0 / u), 0.0)
        du = (b - x) - (x - a)
        return p, np.where(inside, p * du / u ** 2, 0.0)

    def func(sv):
        s = sv.norm2()
        return gr.lift_function([lambda t: psi_derivs(t)[0], lambda t: psi_derivs(t)[1]], s)

    return SusyIntegrand(func, 1, "shell", radial_cutoff=1.0)


def polar_suite() -> list:
    out = []
    dec = polar_decomposition(bump_integrand())
    t0, t1 = dec.terms[(0,)], dec.terms[(1,)]
    out.append(("bump_value", abs(dec.total - math.exp(-1)) < 1e-8, f"total {dec.total.real:.12f}"))
    out.append(("bump_split", abs(t0) < 1e-10 and abs(t1 - math.exp(-1)) < 1e-12,
                f"alpha=0: {abs(t0):.1e}, alpha=1: {t1.real:.12f}"))
    for name, f in polar_test_integrands():
        flat = flat_integral(f).value
        total = polar_decomposition(f).total
        err = abs(total - flat)
        out.append((f"identity_{name}", err < 1e-6 * (1 + abs(flat)), f"|sum - flat| {err:.1e}"))
    dec = polar_decomposition(shell_integrand())
    worst = max(abs(v) for k, v in dec.terms.items() if k != (0,))
    out.append(("compact_support", worst < 1e-10, f"max |I_alpha|, alpha != 0: {worst:.1e}"))
    # z̄z + χ̄χ = r^2 under the polar substitution
    r = np.linspace(0.1, 3.0, 7)
    sv = polar_vector((0,), [r], [np.linspace(0, 6, 7)])
    x = sv.norm2(0)
    dev = max(np.max(np.abs(x.body - r * r) / r ** 2),
              max((np.max(np.abs(c)) for m, c in x.terms.items() if m), default=0.0))
    out.append(("norm_is_r_squared", dev < 1e-14, f"max relative residue {dev:.1e}"))
    return out


def decomposition_suite(deltas=(0.1, 0.3), lam: float = 1.0, E: float = 0.0) -> list:
    spec = LatticeSpec(1, 2)
    out = []
    for d in deltas:
        oracle = toymodel_oracle(spec, d, E, 0.0, lam, (0, 1), method="contour").value
        dec = toymodel_decomposition(spec, d, lam, E, 0.0)
        err = abs(dec.trace - oracle) / abs(oracle)
        out.append((f"decomposition_delta{d}", err < 1e-4, f"rel err {err:.1e}, |R| {abs(dec.remainder):.3e}"))
    return out


def bounds_suite() -> list:
    out = []
    ok, worst = True, 0.0
    for d, Ls in ((1, (8, 16)), (2, (4, 8, 16))):
        for L in Ls:
            for lam in (0.5, 1.0, 2.0):
                for E in (0.0, 2.0 * d):
                    r = combes_thomas_check(LatticeSpec(d, L), lam, E, 1.0)
                    ok &= r["passed"]
                    worst = max(worst, r["entry_ratio_max"])
    out.append(("combes_thomas", ok, f"max |B^-1_ij| / bound = {worst:.3f}"))
    ok, margin = True, math.inf
    for L in (8, 16):
        for lam in (0.5, 1.0, 2.0):
            r = schur_bounds_check(LatticeSpec(1, L), 0.25, lam, 1.0)
            ok &= r["passed"]
            margin = min(margin, r["margin"] / lam)
    out.append(("schur_lower_bound", ok, f"min margin / lambda {margin:.3f}"))
    r = trace_constant_sweep(1, (8, 16, 32), 0.25, 1.0, 1.0)
    out.append(("trace_constant", r["passed"], f"K spread {r['spread']:.3f}"))
    r = x_form_check(ToymodelBlocks.build(LatticeSpec(1, 8), 0.3, 1.0, 0.5))
    out.append(("x_form", r["passed"], f"max deviation {r['form_error']:.1e}"))
    return out


SUITES = {
    "grassmann": grassmann_suite,
    "susy": susy_suite,
    "polar": polar_suite,
    "decomposition": decomposition_suite,
    "bounds": bounds_suite,
}
