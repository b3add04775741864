"""Green's functions, the determinant-ratio generating function and the density of states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import Hamiltonian

FULL_INVERSE_LIMIT = 512


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpectralProbe:
    """Query point ``z = E + i eps``; ``E_tilde`` is only used by the generating function."""

    E: float
    eps: float
    lam: float = 1.0
    E_tilde: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if not math.isfinite(self.E):
            raise ValueError("E must be finite")

    @property
    def z(self) -> complex:
        return complex(self.E, self.eps)


@dataclass(frozen=True)
class GreenResult:
    trace: complex
    entries: dict = field(default_factory=dict)
    logdet: complex | None = None

    def abs2(self, j: int, k: int) -> float:
        return abs(self.entries[(j, k)]) ** 2


def _matrix(H) -> np.ndarray:
    return H.matrix if isinstance(H, Hamiltonian) else np.asarray(H)


def _factor(A: np.ndarray):
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    d = np.diag(lu)
    if not np.all(np.isfinite(d)):
        raise NumericalError("non-finite entries in the factorization")
    if np.any(d == 0):
        rcond = np.min(np.abs(d)) / max(np.max(np.abs(d)), 1e-300)
        raise NumericalError(f"singular factorization (pivot ratio {rcond:.3g})")
    return lu, piv


def _logdet(lu, piv) -> complex:
    d = np.diag(lu).astype(complex)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    return complex(np.sum(np.log(d)) + (1j * np.pi if swaps % 2 else 0))


def green(H, probe: SpectralProbe, entries=()) -> GreenResult:
    """``G(z) = (z - H)^{-1}``: trace, requested entries ``(j, k)`` and ``log det(z - H)``."""
    Hm = _matrix(H)
    N = Hm.shape[0]
    A = probe.z * np.eye(N) - Hm
    lu, piv = _factor(A)
    entries = list(entries)
    if N <= FULL_INVERSE_LIMIT:
        G = scipy.linalg.lu_solve((lu, piv), np.eye(N, dtype=complex))
        trace = complex(np.trace(G))
        ent = {(j, k): complex(G[j, k]) for j, k in entries}
    else:
        trace = 0j
        cols = {}
        block = 256
        for s in range(0, N, block):
            rhs = np.zeros((N, min(block, N - s)), dtype=complex)
            rhs[np.arange(s, s + rhs.shape[1]), np.arange(rhs.shape[1])] = 1
            X = scipy.linalg.lu_solve((lu, piv), rhs)
            trace += complex(np.sum(X[np.arange(s, s + rhs.shape[1]), np.arange(rhs.shape[1])]))
            for j, k in entries:
                if s <= k < s + rhs.shape[1]:
                    cols[(j, k)] = complex(X[j, k - s])
        ent = cols
    return GreenResult(trace, ent, _logdet(lu, piv))


def log_det(H, z: complex) -> complex:
    """Complex ``log det(z - H)`` accumulated from the LU pivots."""
    Hm = _matrix(H)
    return _logdet(*_factor(z * np.eye(Hm.shape[0]) - Hm))


def gen_function(H, probe: SpectralProbe) -> complex:
    """``det((E + i eps) - H) / det((E~ + i eps) - H)`` in log space."""
    if probe.E_tilde is None:
        raise ValueError("generating function needs E_tilde")
    a = log_det(H, probe.z)
    b = log_det(H, complex(probe.E_tilde, probe.eps))
    return complex(np.exp(a - b))


def lorentzian(x, eps: float):
    return eps / (np.pi * (np.asarray(x) ** 2 + eps * eps))


def dos_curve(H, energies, eps: float) -> np.ndarray:
    """``-Im Tr G(E + i eps) / (π N)`` on a grid, from one eigendecomposition."""
    return dos_from_spectrum(eig_spectrum(H), energies, eps)


def dos_from_spectrum(spectrum, energies, eps: float) -> np.ndarray:
    e = np.asarray(spectrum, dtype=float)
    E = np.asarray(energies, dtype=float)
    return lorentzian(E[:, None] - e[None, :], eps).mean(axis=1)


def dos_by_resolvent(H, energies, eps: float) -> np.ndarray:
    """Same as :func:`dos_curve` but with one LU solve per energy."""
    N = _matrix(H).shape[0]
    return np.array([-green(H, SpectralProbe(float(E), eps)).trace.imag / (np.pi * N) for E in energies])


def shifted_free_dos(H0, energies, eps: float, shift: float) -> np.ndarray:
    """DOS of ``H0`` evaluated at ``E + i(eps + shift)``."""
    return dos_curve(H0, energies, eps + shift)


def eig_spectrum(H) -> np.ndarray:
    """Eigenvalues of a real symmetric Hamiltonian, ascending."""
    Hm = _matrix(H)
    if np.iscomplexobj(Hm):
        if np.max(np.abs(Hm.imag)) > 0:
            raise ValueError("eig_spectrum needs a real symmetric matrix")
        Hm = Hm.real
    return scipy.linalg.eigvalsh(Hm)
