"""Exact Lloyd-model formulas, the toymodel with one negative correlation, and bound checks.

For non-negative correlations the averaged resolvent trace is the free trace
with the imaginary shift ``iλT^`` (``T^`` = row sums of ``T``), at every
``eps >= 0``.  The toymodel correlates one nearest-neighbour pair negatively;
its exact average is computed here by quadrature over the two pair variables
after the other sites have been integrated out, and the two-site case is also
split into its region and boundary contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .disorder import DisorderModel
from .grassmann import exp, grassmann_gaussian, top_coefficient
from .lattice import LatticeSpec, build_laplacian
from .quadrature import HALF_LINE, CubatureResult, cubature, half_line
from .superpolar import UnsupportedScaleError, flat_vector, measure


class UsageError(ValueError):
    pass


# -- exact formulas ----------------------------------------------------------

def _shifted(spec: LatticeSpec, model: DisorderModel, E: float, eps: float, lam: float) -> np.ndarray:
    if model.N != spec.N:
        raise UsageError("disorder model and lattice have different sizes")
    H0 = build_laplacian(spec).matrix
    return complex(E, eps) * np.eye(spec.N) + 1j * lam * np.diag(model.row_sums()) - H0


def shifted_trace(spec: LatticeSpec, model: DisorderModel, E: float, eps: float, lam: float) -> complex:
    """``Tr((E + i eps) + iλT^ - H0)^{-1}`` for any model (no applicability check)."""
    A = _shifted(spec, model, E, eps, lam)
    return complex(np.trace(scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), np.eye(spec.N))))


def exact_trace(spec: LatticeSpec, model: DisorderModel, E: float, eps: float, lam: float) -> complex:
    """Averaged ``Tr G(E + i eps)`` for i.i.d. or non-negatively correlated Cauchy disorder."""
    if model.kind == "toymodel":
        raise UsageError("the toymodel has no exact formula; use toymodel_oracle")
    if eps < 0 or lam < 0:
        raise UsageError("eps and lambda must be nonnegative")
    return shifted_trace(spec, model, E, eps, lam)


def _logdet(A) -> complex:
    lu, piv = scipy.linalg.lu_factor(A)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    return complex(np.sum(np.log(np.diag(lu).astype(complex))) + (1j * np.pi if swaps % 2 else 0))


def exact_genfun(spec: LatticeSpec, model: DisorderModel, E: float, E_tilde: float, eps: float,
                 lam: float) -> complex:
    """Averaged ``det(E + i eps - H) / det(E~ + i eps - H)``, a ratio of shifted free determinants."""
    if model.kind == "toymodel":
        raise UsageError("the toymodel has no exact formula")
    a = _logdet(_shifted(spec, model, E, eps, lam))
    b = _logdet(_shifted(spec, model, E_tilde, eps, lam))
    return complex(np.exp(a - b))


# -- toymodel oracle -------------------------------------------------------

class _PairResolvent:
    """``Tr (M0 - λ diag_pair(V1, V2))^{-1}`` through the Schur complement on the pair.

    With ``R`` the block of ``M0`` off the pair (invertible thanks to its
    ``iλ`` shift), ``s0 = a - b R^{-1} c`` and ``P = b R^{-2} c``:
    ``Tr = Tr R^{-1} + Tr[(s0 - D)^{-1} (1 + P)]``.
    """

    def __init__(self, spec: LatticeSpec, pair, E: float, eps: float, lam: float):
        N = spec.N
        p = list(pair)
        rest = [j for j in range(N) if j not in pair]
        P = np.ones(N)
        P[p] = 0
        M0 = complex(E, eps) * np.eye(N) + 1j * lam * np.diag(P) - build_laplacian(spec).matrix
        a = M0[np.ix_(p, p)]
        if rest:
            b = M0[np.ix_(p, rest)]
            c = M0[np.ix_(rest, p)]
            lu = scipy.linalg.lu_factor(M0[np.ix_(rest, rest)])
            Rinv = scipy.linalg.lu_solve(lu, np.eye(len(rest), dtype=complex))
            Rc = Rinv @ c
            self.s0 = a - b @ Rc
            self.P = b @ (Rinv @ Rc)
            self.tau = complex(np.trace(Rinv))
        else:
            self.s0, self.P, self.tau = a, np.zeros((2, 2), dtype=complex), 0j
        self.lam = lam

    def __call__(self, V1, V2) -> np.ndarray:
        s, P = self.s0, self.P
        k11 = s[0, 0] - self.lam * np.asarray(V1)
        k22 = s[1, 1] - self.lam * np.asarray(V2)
        k12, k21 = s[0, 1], s[1, 0]
        det = k11 * k22 - k12 * k21
        # Tr(K^{-1} (1 + P)) with K^{-1} = adj(K) / det
        m11, m12, m21, m22 = 1 + P[0, 0], P[0, 1], P[1, 0], 1 + P[1, 1]
        tr = (k22 * m11 - k12 * m21 - k21 * m12 + k11 * m22) / det
        return self.tau + tr


def _check_pair(spec: LatticeSpec, pair):
    i1, i2 = pair
    if not (0 <= i1 < spec.N and 0 <= i2 < spec.N) or spec.distance(i1, i2) != 1:
        raise UsageError("the correlated pair must be nearest neighbours inside the lattice")


def default_pair(spec: LatticeSpec) -> tuple[int, int]:
    """Centre site and its neighbour along the last axis."""
    c = spec.coords(spec.center)
    n = list(c)
    n[-1] = (n[-1] - 1) % spec.L
    return spec.index(n), spec.center


def toymodel_oracle(spec: LatticeSpec, delta: float, E: float, eps: float, lam: float, pair=None, *,
                    method: str = "cubature", rel_tol: float = 1e-10) -> CubatureResult:
    """Averaged ``Tr G(E + i eps)`` for the toymodel, by quadrature over the pair variables.

    ``method="cubature"`` averages over ``(W1, W2)`` with ``W = tan(π(u - 1/2))``,
    ``u`` uniform on the unit square.  ``method="contour"`` first integrates
    ``V1`` by residues in the lower half-plane, leaving one real integral over
    ``V2``; it also works at ``eps = 0`` on the two-site lattice.
    """
    pair = default_pair(spec) if pair is None else tuple(pair)
    _check_pair(spec, pair)
    if not 0 <= delta < 1:
        raise UsageError("need 0 <= delta < 1")
    F = _PairResolvent(spec, pair, E, eps, lam)
    d2 = delta * delta
    if method == "cubature":
        def f(u):
            w1 = np.tan(np.pi * (u[:, 0] - 0.5))
            w2 = np.tan(np.pi * (u[:, 1] - 0.5))
            return F(w1 - d2 * w2, w2 - d2 * w1)

        return cubature(f, [0, 0], [1, 1], rel_tol=rel_tol, abs_tol=1e-14, initial_splits=4)
    if method == "contour":
        if delta == 0:
            # V1 = W1 independent: residue at V1 = -i
            def f0(t):
                v2 = np.tan(t[:, 0])
                return F(-1j + 0 * v2, v2) / np.pi

            return cubature(f0, [-0.5 * np.pi], [0.5 * np.pi], rel_tol=rel_tol, abs_tol=1e-14, initial_splits=8)
        c = 1 - d2 * d2

        def fc(t):
            v2 = np.tan(t[:, 0])
            jac = 1 + v2 * v2
            p1 = -1j * c - d2 * v2
            p2 = (-1j * c - v2) / d2
            w2_at_p1 = (v2 + d2 * p1) / c
            w1_at_p2 = (p2 + d2 * v2) / c
            out = F(p1, v2) / (np.pi * (1 + w2_at_p1 ** 2)) + F(p2, v2) / (d2 * np.pi * (1 + w1_at_p2 ** 2))
            return out * jac

        return cubature(fc, [-0.5 * np.pi], [0.5 * np.pi], rel_tol=rel_tol, abs_tol=1e-14, initial_splits=8)
    raise UsageError(f"unknown method {method!r}")


# -- block matrices of the toymodel ---------------------------------------------

BETAS = ("++", "+-", "-+")


def t_beta(beta: str, delta: float) -> np.ndarray:
    d2 = delta * delta
    return {"++": (1 - d2) * np.array([1.0, 1.0]),
            "+-": (1 + d2) * np.array([1.0, -1.0]),
            "-+": (1 + d2) * np.array([-1.0, 1.0])}[beta]


@dataclass(frozen=True)
class ToymodelBlocks:
    """Block decomposition of ``C_beta = eps + λT^beta - i(E - H0)`` around the pair.

    ``A[beta]`` is the pair block, ``B`` the block on the remaining sites (which
    carry the shift ``λ``), ``D`` the real coupling with ``C = (A, -iD; -iD^T, B)``.
    """

    spec: LatticeSpec
    pair: tuple
    delta: float
    lam: float
    E: float
    eps: float
    A0: np.ndarray
    A: dict
    B: np.ndarray
    D: np.ndarray

    @classmethod
    def build(cls, spec: LatticeSpec, delta: float, lam: float, E: float, eps: float = 0.0, pair=None):
        pair = default_pair(spec) if pair is None else tuple(pair)
        _check_pair(spec, pair)
        H0 = build_laplacian(spec).matrix
        C0 = eps * np.eye(spec.N) - 1j * (E * np.eye(spec.N) - H0)
        p = list(pair)
        rest = [j for j in range(spec.N) if j not in pair]
        A0 = C0[np.ix_(p, p)]
        A = {b: A0 + lam * np.diag(t_beta(b, delta)) for b in BETAS}
        B = C0[np.ix_(rest, rest)] + lam * np.eye(len(rest))
        D = np.real_if_close(1j * C0[np.ix_(p, rest)]).astype(float)
        return cls(spec, pair, delta, lam, E, eps, A0, A, B, D)

    @property
    def rest(self) -> list:
        return [j for j in range(self.spec.N) if j not in self.pair]

    def C(self, beta: str) -> np.ndarray:
        n = self.B.shape[0]
        out = np.zeros((n + 2, n + 2), dtype=complex)
        out[:2, :2] = self.A[beta]
        out[:2, 2:] = -1j * self.D
        out[2:, :2] = -1j * self.D.T
        out[2:, 2:] = self.B
        return out

    def _binv_dt(self) -> np.ndarray:
        if self.B.shape[0] == 0:
            return np.zeros((0, 2))
        return np.linalg.solve(self.B, self.D.T)

    def S(self, beta: str | None = None) -> np.ndarray:
        """Schur complement ``A + D B^{-1} D^T`` (``beta=None`` gives ``S_0``)."""
        A = self.A0 if beta is None else self.A[beta]
        return A + self.D @ self._binv_dt()

    def M(self) -> np.ndarray:
        if self.B.shape[0] == 0:
            return np.eye(2)
        return np.eye(2) - self.D @ np.linalg.solve(self.B, self._binv_dt())

    def X(self) -> np.ndarray:
        return self.A["-+"] - self.A["++"]

    def v(self, theta1, theta2) -> np.ndarray:
        """Boundary direction ``(e^{iθ1} δ, e^{iθ2})``."""
        return np.stack([np.exp(1j * np.asarray(theta1)) * self.delta, np.exp(1j * np.asarray(theta2))], axis=-1)


# -- two-site decomposition ------------------------------------------------

def _region(beta: str, delta: float) -> tuple[float, float]:
    """Range of ``phi`` with ``r1 = R cos phi``, ``r2 = R sin phi``."""
    a, b = math.atan(delta), math.atan(1.0 / delta)
    return {"++": (a, b), "+-": (0.0, a), "-+": (b, 0.5 * math.pi)}[beta]


def region_integral(blocks: ToymodelBlocks, beta: str, *, rel_tol: float = 1e-7) -> CubatureResult:
    """``I_beta``: flat superintegral of ``(|z1|^2 + |z2|^2) exp(-Phi* C_beta Phi)`` over the region.

    The Grassmann variables are integrated by the Berezin engine at every node;
    ``(r1, r2)`` run over the region in ``(R, phi)``.  The integrand is
    invariant under a common rotation of both phases, so ``θ1`` is fixed at 0
    (factor 2π) and ``θ2`` uses the trapezoid rule.
    """
    C = blocks.A[beta]
    lo, hi = _region(beta, blocks.delta)
    gens = measure([0, 1])

    def f(pts):
        R, jac = half_line(pts[:, 0])
        phi = pts[:, 1]
        r1, r2 = R * np.cos(phi), R * np.sin(phi)
        z = [r1 + 0j, r2 * np.exp(1j * pts[:, 2])]
        sv = flat_vector(z)
        integrand = sv.zbar[0] * sv.z[0] + sv.zbar[1] * sv.z[1]
        top = top_coefficient(integrand * exp(-sv.form(C)), gens)
        # 2π (2π)^{-2} prod_j 2 r_j dr_j,  dr1 dr2 = R dR dphi
        return top * 4 * r1 * r2 * R * jac / (2 * np.pi)

    return cubature(f, [HALF_LINE[0], lo], [HALF_LINE[1], hi], periodic=1, rel_tol=rel_tol, abs_tol=1e-13,
                    initial_splits=2)


def region_integral_reduced(blocks: ToymodelBlocks, beta: str) -> complex:
    """Same as :func:`region_integral` with the angles and ``R`` integrated in closed form.

    The angular average gives ``J0(2 r1 r2)`` and the radial Laplace transform
    ``∫ s^2 e^{-cs} J0(bs) ds = (2c^2 - b^2)/(c^2 + b^2)^{5/2}``, leaving a
    one-dimensional integral over ``phi``.
    """
    C = blocks.A[beta]
    if abs(C[0, 1] + 1j) > 1e-14 or abs(C[1, 0] + 1j) > 1e-14:
        raise UsageError("closed form needs the two-site coupling -i")
    lo, hi = _region(beta, blocks.delta)
    det = grassmann_gaussian(C)

    def g(pts):
        phi = pts[:, 0]
        b = np.sin(2 * phi)
        c = C[0, 0] * np.cos(phi) ** 2 + C[1, 1] * np.sin(phi) ** 2
        return b * (2 * c * c - b * b) / (c * c + b * b) ** 2.5

    res = cubature(g, [lo], [hi], rel_tol=1e-12, abs_tol=1e-15)
    return det * res.value


def _ray_directions(blocks: ToymodelBlocks, theta1, theta2):
    """Directions of the two region boundaries ``|z1| = δ|z2|`` and ``|z1| = |z2|/δ`` per unit ``|z2|``."""
    d = blocks.delta
    e1, e2 = np.exp(1j * np.asarray(theta1)), np.exp(1j * np.asarray(theta2))
    return np.stack([d * e1, e2], axis=-1), np.stack([e1 / d, e2], axis=-1)


def remainder(blocks: ToymodelBlocks, *, rel_tol: float = 1e-8, nodes: int = 64) -> CubatureResult:
    """Boundary term ``R`` of the two-site decomposition.

    The jump of ``λT^beta`` across each region boundary leaves a line integral
    along it, parametrised by ``r2 = |z2|`` and both angles::

        R = π^{-2} ∫ dr2 dθ1 dθ2 λ r2 δ^2 [ e^{-λ(1-δ^4) r2^2} h(z_a)
                                           + δ^{-2} e^{-λ(1-δ^4) r2^2/δ^2} h(z_b) ]

    with ``z_a = r2 (δe^{iθ1}, e^{iθ2})``, ``z_b = r2 (e^{iθ1}/δ, e^{iθ2})`` and
    ``h(z) = |z|^2 e^{-z* A0 z}``.  ``r2`` is cut where the Gaussian weight
    drops below 1e-14; the angles use a ``nodes``-point trapezoid rule.
    """
    lam, d2 = blocks.lam, blocks.delta ** 2
    c = 1 - d2 * d2
    A0 = blocks.A0
    rmax = math.sqrt(math.log(1e14) / (lam * c))

    def f(pts):
        r2 = pts[:, 0]
        va, vb = _ray_directions(blocks, pts[:, 1], pts[:, 2])
        qa = np.einsum("ki,ij,kj->k", va.conj(), A0, va)
        qb = np.einsum("ki,ij,kj->k", vb.conj(), A0, vb)
        s2 = r2 * r2
        ha = (1 + d2) * s2 * np.exp(-s2 * (lam * c + qa))
        hb = (1 + 1 / d2) * s2 * np.exp(-s2 * (lam * c / d2 + qb))
        return lam * r2 * (d2 * ha + hb) / np.pi ** 2

    return cubature(f, [0.0], [rmax], periodic=2, nodes=nodes, rel_tol=rel_tol, abs_tol=1e-15, initial_splits=4)


def remainder_reduced(blocks: ToymodelBlocks, nodes: int = 64) -> complex:
    """:func:`remainder` with the ``r2`` integral in closed form, ``∫ r^3 e^{-a r^2} dr = 1/(2a^2)``."""
    lam, d2 = blocks.lam, blocks.delta ** 2
    t = 2 * np.pi * np.arange(nodes) / nodes
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    A = blocks.A["++"]
    va, vb = _ray_directions(blocks, t1.ravel(), t2.ravel())
    qa = np.einsum("ki,ij,kj->k", va.conj(), A, va)
    qb = np.einsum("ki,ij,kj->k", vb.conj(), A, vb)
    vals = lam * d2 * (1 + d2) / (2 * qa ** 2) + lam * (1 + 1 / d2) / (2 * qb ** 2)
    return complex(4 * np.mean(vals))  # (2π)^2 / π^2


@dataclass(frozen=True)
class Decomposition:
    terms: dict
    remainder: complex
    errors: dict

    @property
    def total(self) -> complex:
        """``sum_beta I_beta + R``; equals ``i E[Tr G]``."""
        return complex(sum(self.terms.values()) + self.remainder)

    @property
    def trace(self) -> complex:
        return -1j * self.total


def toymodel_decomposition(spec: LatticeSpec, delta: float, lam: float, E: float, eps: float = 0.0, *,
                           rel_tol: float = 1e-7) -> Decomposition:
    """Region terms ``I_beta`` and boundary term ``R`` of the two-site toymodel."""
    if spec.N != 2:
        raise UnsupportedScaleError("the decomposition is only evaluated on the two-site lattice")
    if not 0 < delta < 1:
        raise UsageError("need 0 < delta < 1")
    blocks = ToymodelBlocks.build(spec, delta, lam, E, eps, pair=(0, 1))
    terms, errors = {}, {}
    for beta in BETAS:
        res = region_integral(blocks, beta, rel_tol=rel_tol)
        terms[beta] = res.value
        errors[beta] = res.error
    rem = remainder(blocks, rel_tol=rel_tol)
    errors["R"] = rem.error
    return Decomposition(terms, rem.value, errors)


# -- error scaling ---------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    deltas: tuple
    deviations: tuple
    errors: tuple
    floor: float
    slope: float
    intercept: float


def relative_deviation(spec: LatticeSpec, delta: float, E: float, eps: float, lam: float, pair=None,
                       rel_tol: float = 1e-11) -> tuple[float, float]:
    """``|oracle - shifted exact| / |shifted exact|`` and its quadrature error bound."""
    pair = default_pair(spec) if pair is None else tuple(pair)
    if delta == 0:
        model = DisorderModel.iid(spec.N)
    else:
        model = DisorderModel.toymodel(spec.N, delta, pair, spec)
    exact = shifted_trace(spec, model, E, eps, lam)
    res = toymodel_oracle(spec, delta, E, eps, lam, pair, rel_tol=rel_tol)
    return abs(res.value - exact) / abs(exact), res.error / abs(exact)


def toymodel_error_sweep(spec: LatticeSpec, deltas, lam: float, E: float, eps: float = 0.0, pair=None, *,
                         rel_tol: float = 1e-11) -> SweepResult:
    """Relative deviation from the shifted formula per delta and the log-log slope above the delta=0 floor."""
    deltas = tuple(float(d) for d in deltas)
    devs, errs = [], []
    for d in deltas:
        dev, err = relative_deviation(spec, d, E, eps, lam, pair, rel_tol)
        devs.append(dev)
        errs.append(err)
    floor = relative_deviation(spec, 0.0, E, eps, lam, pair, rel_tol)[0]
    x = [math.log(d) for d, v in zip(deltas, devs) if d > 0 and v > floor]
    y = [math.log(v - floor) for d, v in zip(deltas, devs) if d > 0 and v > floor]
    if len(x) >= 2:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope = intercept = float("nan")
    return SweepResult(deltas, tuple(devs), tuple(errs), floor, float(slope), float(intercept))


# -- bounds on the block matrices ----------------------------------------------

def _rest_distance(spec: LatticeSpec, rest) -> np.ndarray:
    return spec.distance_matrix()[np.ix_(rest, rest)]


def combes_thomas_check(spec: LatticeSpec, lam: float, E: float, eta: float = 1.0, *, n_vectors: int = 100,
                        seed: int = 0, pair=None) -> dict:
    """Entrywise exponential decay and quadratic-form lower bound for ``B^{-1}``."""
    if eta <= 0:
        raise UsageError("eta must be positive")
    # B does not depend on delta
    blocks = ToymodelBlocks.build(spec, 0.25, lam, E, 0.0, pair)
    B = blocks.B
    n = B.shape[0]
    Binv = np.linalg.inv(B)
    mu = lam * eta / (lam + 4 * spec.d * math.exp(eta))
    dist = _rest_distance(spec, blocks.rest)
    bound = (2 / lam) * np.exp(-mu * dist)
    ratio = np.abs(Binv) / bound
    worst = np.unravel_index(int(np.argmax(ratio)), ratio.shape) if n else (0, 0)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(n_vectors, n)) + 1j * rng.normal(size=(n_vectors, n))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    quad = np.einsum("ki,ij,kj->k", f.conj(), Binv, f).real
    qbound = lam / (lam ** 2 + (4 * spec.d) ** 2)
    rest = blocks.rest
    return {
        "mu": mu,
        "entry_ratio_max": float(ratio.max()) if n else 0.0,
        "worst_entry": (rest[worst[0]], rest[worst[1]]) if n else None,
        "diagonal_max": float(np.max(np.abs(np.diag(Binv)))) if n else 0.0,
        "entries_pass": bool(np.all(ratio <= 1)),
        "quadratic_min": float(quad.min()) if n else float("inf"),
        "quadratic_bound": qbound,
        "quadratic_pass": bool(np.all(quad >= qbound)),
        "passed": bool(np.all(ratio <= 1) and np.all(quad >= qbound)),
    }


def schur_bounds_check(spec: LatticeSpec, delta: float, lam: float, E: float, *, n_vectors: int = 100,
                       seed: int = 0, pair=None) -> dict:
    """Hermitian-part lower bound ``λ/2`` for ``S_++`` and the empirical trace constant."""
    if not 0 <= delta <= 0.5:
        raise UsageError("the bounds are stated for 0 <= delta <= 1/2")
    blocks = ToymodelBlocks.build(spec, delta, lam, E, 0.0, pair)
    S = blocks.S("++")
    herm = 0.5 * (S + S.conj().T)
    ev = np.linalg.eigvalsh(herm)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(n_vectors, 2)) + 1j * rng.normal(size=(n_vectors, 2))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    quad = np.einsum("ki,ij,kj->k", f.conj(), S, f).real
    tr = np.trace(np.linalg.inv(blocks.C("++")))
    K = spec.N * lam / (abs(tr) * (lam + 1) ** 2)
    return {
        "hermitian_eigenvalues": ev.tolist(),
        "quadratic_min": float(quad.min()),
        "bound": lam / 2,
        "margin": float(min(ev.min(), quad.min()) - lam / 2),
        "K_empirical": float(K),
        "passed": bool(ev.min() >= lam / 2 and quad.min() >= lam / 2),
    }


def trace_constant_sweep(d: int, Ls, delta: float, lam: float, E: float, bc: str = "restriction") -> dict:
    """Empirical constant of the trace lower bound across volumes."""
    Ks = [schur_bounds_check(LatticeSpec(d, L, bc), delta, lam, E)["K_empirical"] for L in Ls]
    return {"L": list(Ls), "K": Ks, "spread": max(Ks) / min(Ks), "passed": max(Ks) / min(Ks) < 2}


def x_form_check(blocks: ToymodelBlocks, n_theta: int = 16, n_radius: int = 9) -> dict:
    """Compare ``w* X w`` with ``2λδ^2(1 - |v|^2)`` for ``w = (δv, 1)`` on a grid of the unit disk."""
    X = blocks.X()
    lam, delta = blocks.lam, blocks.delta
    body_err = float(np.max(np.abs(X - 2 * lam * np.diag([-1.0, delta ** 2]))))
    t = 2 * np.pi * np.arange(n_theta) / n_theta
    s = np.linspace(0, 1, n_radius)
    v = (s[:, None] * np.exp(1j * t)[None, :]).ravel()
    w = np.stack([delta * v, np.ones_like(v)], axis=1)
    form = np.einsum("ki,ij,kj->k", w.conj(), X, w)
    expected = 2 * lam * delta ** 2 * (1 - np.abs(v) ** 2)
    return {
        "body_error": body_err,
        "form_error": float(np.max(np.abs(form - expected))),
        "min_form": float(form.real.min()),
        "passed": bool(body_err < 1e-12 and np.max(np.abs(form - expected)) < 1e-12 and form.real.min() >= -1e-12),
    }
