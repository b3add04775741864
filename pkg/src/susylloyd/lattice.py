"""Finite cubes in Z^d, the discrete Laplacian and the Anderson Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOUNDARY_CONDITIONS = ("restriction", "periodic")
MAX_SITES = 4096


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    """Cube ``{0..L-1}^d`` with row-major site indexing.

    Parameters
    ----------
    d : int
        Dimension.
    L : int
        Side length.
    bc : str
        ``"restriction"`` drops neighbours outside the cube, ``"periodic"`` wraps.
    """

    d: int
    L: int
    bc: str = "restriction"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise LatticeError(f"dimension must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 1:
            raise LatticeError(f"side length must be a positive integer, got {self.L!r}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise LatticeError(f"boundary condition must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")
        if self.bc == "periodic" and self.L < 3:
            raise LatticeError("periodic boundary needs L >= 3 (L < 3 creates double edges)")
        if self.N > MAX_SITES:
            raise LatticeError(f"N = L^d = {self.N} exceeds the dense limit {MAX_SITES}")

    @property
    def N(self) -> int:
        return self.L ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    def coords(self, j: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(j, self.shape))

    def index(self, coords) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.shape))

    @property
    def center(self) -> int:
        return self.index([self.L // 2] * self.d)

    def neighbors(self, j: int) -> list[int]:
        c = np.array(self.coords(j))
        out = []
        for axis in range(self.d):
            for step in (-1, 1):
                n = c.copy()
                n[axis] += step
                if self.bc == "periodic":
                    n[axis] %= self.L
                elif not 0 <= n[axis] < self.L:
                    continue
                out.append(self.index(n))
        return sorted(out)

    def distance(self, j: int, k: int) -> int:
        """Graph (l1) distance; minimum image for periodic cubes."""
        diff = np.abs(np.array(self.coords(j)) - np.array(self.coords(k)))
        if self.bc == "periodic":
            diff = np.minimum(diff, self.L - diff)
        return int(diff.sum())

    def distance_matrix(self) -> np.ndarray:
        c = np.stack(np.unravel_index(np.arange(self.N), self.shape), axis=1)
        diff = np.abs(c[:, None, :] - c[None, :, :])
        if self.bc == "periodic":
            diff = np.minimum(diff, self.L - diff)
        return diff.sum(axis=2)

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "bc": self.bc}


@dataclass(frozen=True)
class Hamiltonian:
    """Dense ``H = -Δ + λ diag(V)`` with metadata."""

    matrix: np.ndarray
    spec: LatticeSpec
    lam: float = 0.0
    realization: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


def build_laplacian(spec: LatticeSpec) -> Hamiltonian:
    """``-Δ``: neighbour count on the diagonal, ``-1`` between nearest neighbours."""
    N = spec.N
    H0 = np.zeros((N, N))
    idx = np.arange(N)
    c = np.stack(np.unravel_index(idx, spec.shape), axis=1)
    for axis in range(spec.d):
        n = c.copy()
        n[:, axis] += 1
        if spec.bc == "periodic":
            n[:, axis] %= spec.L
            ok = np.ones(N, dtype=bool)
        else:
            ok = n[:, axis] < spec.L
        j = idx[ok]
        k = np.ravel_multi_index(tuple(n[ok].T), spec.shape)
        H0[j, k] -= 1
        H0[k, j] -= 1
        H0[j, j] += 1
        H0[k, k] += 1
    H0.setflags(write=False)
    return Hamiltonian(H0, spec, 0.0)


def assemble(spec: LatticeSpec, lam: float, V, realization: int | None = None) -> Hamiltonian:
    """``H = -Δ + λ diag(V)``."""
    V = np.asarray(V, dtype=float)
    if V.shape != (spec.N,):
        raise LatticeError(f"potential must have shape ({spec.N},), got {V.shape}")
    if not np.all(np.isfinite(V)):
        raise LatticeError("potential contains non-finite values")
    H = np.array(build_laplacian(spec).matrix)
    H[np.diag_indices(spec.N)] += lam * V
    return Hamiltonian(H, spec, float(lam), realization)


def free_spectrum(spec: LatticeSpec) -> np.ndarray:
    """Eigenvalues of ``-Δ`` in closed form (sorted)."""
    L = spec.L
    if spec.bc == "periodic":
        one = 2 - 2 * np.cos(2 * np.pi * np.arange(L) / L)
    else:
        one = 2 - 2 * np.cos(np.pi * np.arange(L) / L)
    ev = np.zeros(1)
    for _ in range(spec.d):
        ev = (ev[:, None] + one[None, :]).ravel()
    return np.sort(ev)
