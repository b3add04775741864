"""Supervectors, supersymmetric Gaussian integrals and supersymmetric polar coordinates.

A superfunction on ``n`` sites is any callable taking a :class:`SuperVector`
and returning a :class:`~susylloyd.grassmann.GrassmannElement`, written with
ordinary Grassmann arithmetic.  The same callable is evaluated

* in flat coordinates, ``z_j = r_j e^{iθ_j}`` scalar and ``chi_j`` odd
  generators, for :func:`flat_integral`;
* after the polar substitution ``Psi_alpha`` for :func:`polar_decomposition`,
  where ``z_j`` becomes the even element ``e^{iθ_j}(r_j - rhobar_j rho_j / 2)``.

All coefficients are numpy arrays over a batch of quadrature nodes, so one call
evaluates the integrand everywhere a cubature cell needs it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from .disorder import cauchy_char_derivatives
from .grassmann import GrassmannElement, GrassmannError, exp, lift_function, top_coefficient
from .quadrature import HALF_LINE, CubatureResult, cubature, half_line

MAX_SITES = 2


class UnsupportedScaleError(ValueError):
    """Requested lattice or integral dimension is beyond what is supported."""


class PreconditionError(ValueError):
    pass


def chibar_index(j: int) -> int:
    return 2 * j + 1


def chi_index(j: int) -> int:
    return 2 * j + 2


def measure(sites: Sequence[int]) -> list[int]:
    """Generator order of ``prod_j dchibar_j dchi_j`` over ``sites``."""
    out = []
    for j in sorted(sites):
        out += [chibar_index(j), chi_index(j)]
    return out


@dataclass(frozen=True)
class SuperVector:
    """Components ``(z_j, zbar_j, chi_j, chibar_j)`` of ``n`` supervectors."""

    z: tuple
    zbar: tuple
    chi: tuple
    chibar: tuple
    q: int

    @property
    def n(self) -> int:
        return len(self.z)

    def pair(self, j: int, k: int) -> GrassmannElement:
        """``Phi*_j Phi_k = zbar_j z_k + chibar_j chi_k``."""
        return self.zbar[j] * self.z[k] + self.chibar[j] * self.chi[k]

    def norm2(self, j: int | None = None) -> GrassmannElement:
        if j is not None:
            return self.pair(j, j)
        out = GrassmannElement(self.q)
        for i in range(self.n):
            out = out + self.pair(i, i)
        return out

    def form(self, A, B=None) -> GrassmannElement:
        """``sum_jk zbar_j A_jk z_k + chibar_j B_jk chi_k`` (``B`` defaults to ``A``)."""
        A = np.asarray(A, dtype=complex)
        B = A if B is None else np.asarray(B, dtype=complex)
        out = GrassmannElement(self.q)
        for j in range(self.n):
            for k in range(self.n):
                if A[j, k] != 0:
                    out = out + A[j, k] * (self.zbar[j] * self.z[k])
                if B[j, k] != 0:
                    out = out + B[j, k] * (self.chibar[j] * self.chi[k])
        return out


@dataclass(frozen=True)
class SusyIntegrand:
    """Integrable superfunction on ``n_sites`` supervectors.

    ``radial_cutoff`` truncates every radial integral to ``[0, cutoff]``; set it
    when the integrand is known to vanish beyond it.
    """

    func: Callable[[SuperVector], GrassmannElement]
    n_sites: int
    name: str = ""
    radial_cutoff: float | None = None

    def __call__(self, sv: SuperVector) -> GrassmannElement:
        return self.func(sv)


def flat_vector(z: Sequence) -> SuperVector:
    """Supervector with scalar (array) complex components and free generators."""
    n = len(z)
    q = 2 * n
    zs = tuple(GrassmannElement.scalar(q, zj) for zj in z)
    zb = tuple(GrassmannElement.scalar(q, np.conj(zj)) for zj in z)
    chi = tuple(GrassmannElement.generator(q, chi_index(j)) for j in range(n))
    chib = tuple(GrassmannElement.generator(q, chibar_index(j)) for j in range(n))
    return SuperVector(zs, zb, chi, chib, q)


def polar_vector(alpha: Sequence[int], r: Sequence, theta: Sequence) -> SuperVector:
    """Image of ``Psi_alpha``; ``r``/``theta`` are ignored on sites with ``alpha_j = 1``."""
    n = len(alpha)
    q = 2 * n
    zero = GrassmannElement(q)
    z, zb, chi, chib = [], [], [], []
    for j in range(n):
        if alpha[j]:
            z.append(zero), zb.append(zero), chi.append(zero), chib.append(zero)
            continue
        rho = GrassmannElement.generator(q, chi_index(j))
        rhobar = GrassmannElement.generator(q, chibar_index(j))
        radius = r[j] - 0.5 * (rhobar * rho)
        phase = np.exp(1j * np.asarray(theta[j]))
        sq = np.sqrt(np.asarray(r[j], dtype=float))
        z.append(phase * radius)
        zb.append(np.conj(phase) * radius)
        chi.append(sq * rho)
        chib.append(sq * rhobar)
    return SuperVector(tuple(z), tuple(zb), tuple(chi), tuple(chib), q)


def _as_batch(x, size: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=complex), (size,))


def _angle_dependence(F, m: int, radial_sample: np.ndarray, rng: np.random.Generator) -> list[bool]:
    """Which of the ``m`` angles the reduced integrand ``F(r, theta)`` depends on."""
    k = radial_sample.shape[0]
    theta = rng.uniform(0, 2 * np.pi, size=(k, m))
    base = _as_batch(F(radial_sample, theta), k)
    scale = np.max(np.abs(base)) + 1e-300
    out = []
    for j in range(m):
        dependent = False
        for shift in (1.1, 2.7, 4.3):
            th = theta.copy()
            th[:, j] = (th[:, j] + shift) % (2 * np.pi)
            if np.max(np.abs(_as_batch(F(radial_sample, th), k) - base)) > 1e-13 * scale:
                dependent = True
                break
        out.append(dependent)
    return out


def _rotation_invariant(F, m: int, active: list, radial_sample: np.ndarray, rng: np.random.Generator) -> bool:
    """Whether ``F`` is unchanged by a common shift of all active angles."""
    if len(active) < 2:
        return False
    k = radial_sample.shape[0]
    theta = np.zeros((k, m))
    theta[:, active] = rng.uniform(0, 2 * np.pi, size=(k, len(active)))
    base = _as_batch(F(radial_sample, theta), k)
    scale = np.max(np.abs(base)) + 1e-300
    for shift in (0.9, 3.1):
        th = theta.copy()
        th[:, active] = (th[:, active] + shift) % (2 * np.pi)
        if np.max(np.abs(_as_batch(F(radial_sample, th), k) - base)) > 1e-13 * scale:
            return False
    return True


def radial_angular_integral(
    F: Callable[[np.ndarray, np.ndarray], np.ndarray],
    m: int,
    *,
    radial_cutoff: float | None = None,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
) -> CubatureResult:
    """``∫_{(0,∞)^m x (0,2π)^m} F(r, θ) dr dθ`` with trivial angles detected and skipped.

    ``F`` receives arrays ``r`` and ``theta`` of shape ``(K, m)``.
    """
    if m == 0:
        v = complex(np.asarray(F(np.zeros((1, 0)), np.zeros((1, 0)))).reshape(-1)[0])
        return CubatureResult(v, 0.0, 1, 0, 1)
    lo, hi = (0.0, radial_cutoff) if radial_cutoff is not None else HALF_LINE
    rng = np.random.default_rng(12345)
    u = rng.uniform(lo, hi, size=(24, m))
    sample = u if radial_cutoff is not None else np.tan(u)
    dep = _angle_dependence(F, m, sample, rng)
    active = [j for j in range(m) if dep[j]]
    trivial_factor = (2 * np.pi) ** (m - len(active))
    if _rotation_invariant(F, m, active, sample, rng):
        # integrate the last active angle out at zero
        active = active[:-1]
        trivial_factor *= 2 * np.pi

    def integrand(pts):
        u = pts[:, :m]
        if radial_cutoff is not None:
            r, jac = u, np.ones_like(u)
        else:
            r, jac = half_line(u)
        theta = np.zeros_like(r)
        theta[:, active] = pts[:, m:]
        return _as_batch(F(r, theta), r.shape[0]) * np.prod(jac, axis=1)

    res = cubature(integrand, [lo] * m, [hi] * m, periodic=len(active),
                   rel_tol=rel_tol, abs_tol=abs_tol / trivial_factor)
    return CubatureResult(res.value * trivial_factor, res.error * trivial_factor,
                          res.evaluations, res.cells, res.periodic_nodes)


def flat_integral(
    f: SusyIntegrand,
    n: int | None = None,
    *,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
) -> CubatureResult:
    """``∫ [dPhi* dPhi] f`` with measure ``prod_j (2π)^{-1} dzbar_j dz_j dchibar_j dchi_j``.

    Grassmann variables are integrated symbolically at each node, then the
    ``z`` integrals are done in ordinary polar coordinates
    (``dzbar dz = 2 r dr dθ``).
    """
    n = f.n_sites if n is None else n
    if n > MAX_SITES:
        raise UnsupportedScaleError(f"flat integrals are limited to n <= {MAX_SITES} sites")
    gens = measure(range(n))

    def F(r, theta):
        z = [r[:, j] * np.exp(1j * theta[:, j]) for j in range(n)]
        top = top_coefficient(f(flat_vector(z)), gens)
        return top * np.prod(r, axis=1) * (1.0 / np.pi) ** n

    return radial_angular_integral(F, n, radial_cutoff=f.radial_cutoff, rel_tol=rel_tol, abs_tol=abs_tol)


@dataclass
class PolarDecomposition:
    terms: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def total(self) -> complex:
        return complex(sum(self.terms.values()))

    @property
    def error(self) -> float:
        return float(sum(self.errors.values()))


def polar_term(
    f: SusyIntegrand,
    alpha: Sequence[int],
    *,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
) -> CubatureResult:
    """One boundary term ``I_alpha(f)``."""
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha)
    active = [j for j in range(n) if not alpha[j]]
    m = len(active)
    gens = measure(active)

    def F(r, theta):
        k = r.shape[0]
        rr = [np.zeros(k)] * n
        tt = [np.zeros(k)] * n
        for i, j in enumerate(active):
            rr[j] = r[:, i]
            tt[j] = theta[:, i]
        return top_coefficient(f(polar_vector(alpha, rr, tt)), gens) * np.pi ** (-m)

    return radial_angular_integral(F, m, radial_cutoff=f.radial_cutoff, rel_tol=rel_tol, abs_tol=abs_tol)


def polar_decomposition(
    f: SusyIntegrand,
    n: int | None = None,
    *,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
) -> PolarDecomposition:
    """All terms ``I_alpha(f)``, ``alpha in {0,1}^n``; their sum equals the flat integral."""
    n = f.n_sites if n is None else n
    if n > MAX_SITES:
        raise UnsupportedScaleError(f"polar decomposition is limited to n <= {MAX_SITES} sites")
    out = PolarDecomposition()
    for alpha in itertools.product((0, 1), repeat=n):
        res = polar_term(f, alpha, rel_tol=rel_tol, abs_tol=abs_tol)
        out.terms[alpha] = res.value
        out.errors[alpha] = res.error
    return out


# -- standard integrands ---------------------------------------------------

def gaussian_integrand(A1, A2=None, prefactor: Callable[[SuperVector], GrassmannElement] | None = None,
                       name: str = "gaussian") -> SusyIntegrand:
    """``prefactor(Phi) * exp(-Phi* A Phi)`` with boson block ``A1`` and fermion block ``A2``."""
    A1 = np.atleast_2d(np.asarray(A1, dtype=complex))
    A2 = A1 if A2 is None else np.atleast_2d(np.asarray(A2, dtype=complex))

    def func(sv):
        g = exp(-sv.form(A1, A2))
        return g if prefactor is None else prefactor(sv) * g

    return SusyIntegrand(func, A1.shape[0], name)


def bump_integrand() -> SusyIntegrand:
    """``phi(Phi*Phi)`` with ``phi(x) = exp(-1/(1-2x^2))`` on ``|x| < 1/sqrt 2``, one site."""

    def phi(x):
        x = np.real(x)
        s = 1 - 2 * x * x
        inside = s > 0
        out = np.zeros_like(x, dtype=float)
        out[inside] = np.exp(-1.0 / s[inside])
        return out

    def dphi(x):
        x = np.real(x)
        s = 1 - 2 * x * x
        inside = s > 0
        out = np.zeros_like(x, dtype=float)
        out[inside] = np.exp(-1.0 / s[inside]) * (-4 * x[inside] / s[inside] ** 2)
        return out

    def func(sv):
        a = sv.norm2()
        body = np.atleast_1d(np.real(a.body))
        k = body.shape
        return lift_function([lambda b: phi(np.broadcast_to(np.real(b), k).copy()),
                              lambda b: dphi(np.broadcast_to(np.real(b), k).copy())], a)

    # x = r^2 < 2^{-1/2}
    return SusyIntegrand(func, 1, "bump", radial_cutoff=2 ** -0.25)


# -- verification reports --------------------------------------------------

def _lu_det(A) -> complex:
    lu, piv = scipy.linalg.lu_factor(np.asarray(A, dtype=complex))
    sign = -1.0 if np.count_nonzero(piv != np.arange(piv.size)) % 2 else 1.0
    return complex(sign * np.prod(np.diag(lu)))


def verify_susy_representation(A1, A2, *, rel_tol: float = 1e-8) -> dict:
    """Compare ``∫ e^{-Phi* A Phi}`` with ``det A2 / det A1`` and ``∫ zbar_k z_j e^{...}`` with ``A1^{-1}``."""
    A1 = np.atleast_2d(np.asarray(A1, dtype=complex))
    A2 = np.atleast_2d(np.asarray(A2, dtype=complex))
    n = A1.shape[0]
    if n > MAX_SITES:
        raise UnsupportedScaleError(f"n <= {MAX_SITES} required")
    herm = 0.5 * (A1 + A1.conj().T)
    if np.min(np.linalg.eigvalsh(herm)) <= 0:
        raise PreconditionError("Re A1 must be positive definite")
    quad_tol = rel_tol / 10
    ratio = flat_integral(gaussian_integrand(A1, A2), rel_tol=quad_tol)
    expected = _lu_det(A2) / _lu_det(A1)
    ratio_err = abs(ratio.value - expected) / abs(expected)
    inv = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A1), np.eye(n))
    entries = {}
    worst = ratio_err
    for j in range(n):
        for k in range(n):
            pref = (lambda j, k: lambda sv: sv.zbar[k] * sv.z[j])(j, k)
            res = flat_integral(gaussian_integrand(A1, A1, prefactor=pref), rel_tol=quad_tol,
                                abs_tol=1e-3 * rel_tol * np.max(np.abs(inv)))
            err = abs(res.value - inv[j, k]) / np.max(np.abs(inv))
            entries[(j, k)] = {"integral": res.value, "expected": complex(inv[j, k]), "rel_err": err}
            worst = max(worst, err)
    return {
        "det_ratio": {"integral": ratio.value, "expected": expected, "rel_err": ratio_err},
        "inverse_entries": entries,
        "max_rel_err": worst,
        "passed": worst < rel_tol,
    }


def g2_oracle(E: float, eps: float, lam: float) -> float:
    """``∫ |E + i eps - lam v|^{-2} dmu(v)`` for standard Cauchy ``mu``, by quadrature in ``u``.

    ``v = tan(π(u - 1/2))`` turns the Cauchy measure into ``du`` on ``(0, 1)``.
    """
    if lam == 0:
        return 1.0 / (E * E + eps * eps)

    def g(u):
        v = math.tan(math.pi * (u - 0.5))
        return 1.0 / ((E - lam * v) ** 2 + eps * eps)

    # resonance at v = E / lam
    u_peak = 0.5 + math.atan(E / lam) / math.pi
    val, _ = scipy.integrate.quad(g, 0.0, 1.0, points=[u_peak], epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def g2_integrand(E: float, eps: float, lam: float) -> SusyIntegrand:
    """Double-copy integrand for ``E|G(E+i eps)|^2`` on a single site.

    Site 0 carries ``Phi`` and site 1 carries ``Phi~``.
    """
    derivs = cauchy_char_derivatives()

    def func(sv):
        a = sv.norm2(0)
        b = sv.norm2(1)
        gp = sv.zbar[0] * sv.z[0] * exp(1j * (E + 1j * eps) * a)
        gm = sv.z[1] * sv.zbar[1] * exp(-1j * (E - 1j * eps) * b)
        arg = lam * (a - b)
        return gp * gm * lift_function(derivs, arg)

    return SusyIntegrand(func, 2, "g2")


def verify_g2_single_site(E: float, eps: float, lam: float, *, n_sites: int = 1,
                          rel_tol: float = 1e-6) -> dict:
    """Polar double-copy representation of ``E|G_{11}|^2`` against the 1-D Cauchy quadrature."""
    if n_sites != 1:
        raise UnsupportedScaleError("the |G|^2 representation is only evaluated for a single site")
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    dec = polar_decomposition(g2_integrand(E, eps, lam), rel_tol=rel_tol / 10, abs_tol=1e-14)
    oracle = g2_oracle(E, eps, lam)
    value = dec.total
    err = abs(value - oracle) / abs(oracle)
    return {
        "polar": value,
        "terms": {"".join(map(str, k)): v for k, v in dec.terms.items()},
        "oracle": oracle,
        "rel_err": err,
        "passed": err < rel_tol,
    }
