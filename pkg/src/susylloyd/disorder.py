"""Cauchy random potentials with linear correlations.

Potentials are ``V = T W`` with ``W`` i.i.d. standard Cauchy.  Random numbers
come from counter-based Philox streams: sample ``m`` of stream ``(seed, s)``
always consumes the same block of the counter space, so results do not depend
on how samples are batched or distributed over threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

KINDS = ("iid", "nonneg", "toymodel")


class DisorderError(ValueError):
    pass


# -- random streams --------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Pure map ``(seed, stream, sample index) -> uniforms``."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2 ** 64) or self.stream < 0:
            raise DisorderError("seed must be a 64-bit unsigned integer and stream nonnegative")

    def _key(self) -> np.ndarray:
        return np.random.SeedSequence([self.seed, self.stream]).generate_state(2, dtype=np.uint64)

    def uniforms(self, start: int, count: int, width: int) -> np.ndarray:
        """Uniforms in ``(0, 1)`` for samples ``start .. start+count-1``, shape ``(count, width)``.

        Sample ``m`` uses the 64-bit words ``[m*S, m*S + width)`` of the stream,
        where ``S`` is ``width`` rounded up to a multiple of 4 (one Philox block).
        """
        stride = 4 * ((width + 3) // 4)
        bg = np.random.Philox(key=self._key())
        # each advance step moves one 4-word block
        bg.advance(start * stride // 4)
        raw = bg.random_raw(count * stride).reshape(count, stride)[:, :width]
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def sample(self, m: int, width: int) -> np.ndarray:
        return self.uniforms(m, 1, width)[0]


def cauchy_quantile(u):
    """Inverse CDF of the standard Cauchy law, ``tan(π(u - 1/2))``."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DisorderError("Cauchy quantile needs 0 < u < 1")
    out = np.tan(np.pi * (u - 0.5))
    return float(out) if out.ndim == 0 else out


def cauchy_cdf(x):
    return 0.5 + np.arctan(x) / np.pi


def cauchy_char(t):
    """Characteristic function ``E[e^{itW}] = e^{-|t|}`` of the standard Cauchy law."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.abs(t))
    return float(out) if out.ndim == 0 else out


def cauchy_char_derivatives(order: int = 5) -> list[Callable]:
    """Derivatives ``k = 0..order-1`` of ``e^{-|t|}`` away from ``t = 0`` (real part of the argument)."""

    def make(k):
        def f(t):
            t = np.real(np.asarray(t))
            s = np.sign(t) if k % 2 else 1.0
            return (-1.0) ** k * s * np.exp(-np.abs(t))
        return f

    return [make(k) for k in range(order)]


# -- correlation structures ------------------------------------------------

@dataclass(frozen=True)
class DisorderModel:
    """Linear correlation ``V = T W``.

    ``kind`` is ``"iid"`` (``T = 1``), ``"nonneg"`` (dense ``T`` given) or
    ``"toymodel"``: unit diagonal and ``T_{i1 i2} = T_{i2 i1} = -delta^2`` for
    one nearest-neighbour pair, stored implicitly.
    """

    kind: str
    N: int
    T: np.ndarray | None = None
    delta: float | None = None
    pair: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DisorderError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "nonneg":
            T = np.asarray(self.T, dtype=float)
            if T.shape != (self.N, self.N):
                raise DisorderError(f"T must be {self.N}x{self.N}, got {T.shape}")
            if not np.all(np.isfinite(T)):
                raise DisorderError("T contains non-finite entries")
            if not np.allclose(T, T.T, rtol=0, atol=1e-12):
                raise DisorderError("T must be symmetric")
            if np.any(T.sum(axis=0) <= 0):
                raise DisorderError("column sums of T must be positive")
            T = T.copy()
            T.setflags(write=False)
            object.__setattr__(self, "T", T)
        elif self.kind == "toymodel":
            if self.delta is None or not 0 < self.delta < 1:
                raise DisorderError("toymodel needs 0 < delta < 1")
            if self.pair is None or len(self.pair) != 2 or self.pair[0] == self.pair[1]:
                raise DisorderError("toymodel needs a pair of distinct sites")
            i1, i2 = (int(p) for p in self.pair)
            if not (0 <= i1 < self.N and 0 <= i2 < self.N):
                raise DisorderError("toymodel pair outside the lattice")
            object.__setattr__(self, "pair", (i1, i2))

    @classmethod
    def iid(cls, N: int) -> DisorderModel:
        return cls("iid", N)

    @classmethod
    def nonneg(cls, T) -> DisorderModel:
        T = np.asarray(T, dtype=float)
        return cls("nonneg", T.shape[0], T=T)

    @classmethod
    def toymodel(cls, N: int, delta: float, pair, spec=None) -> DisorderModel:
        """Toymodel on a nearest-neighbour pair (checked against ``spec`` when given)."""
        if spec is not None and spec.distance(pair[0], pair[1]) != 1:
            raise DisorderError("toymodel pair must be nearest neighbours")
        return cls("toymodel", N, delta=float(delta), pair=tuple(pair))

    @classmethod
    def from_csv(cls, path: str | Path) -> DisorderModel:
        with open(path, newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row and not row[0].startswith("#")]
        return cls.nonneg(np.array(rows))

    def matrix(self) -> np.ndarray:
        """Dense ``T`` (allocates for iid and toymodel)."""
        if self.kind == "nonneg":
            return np.array(self.T)
        T = np.eye(self.N)
        if self.kind == "toymodel":
            i1, i2 = self.pair
            T[i1, i2] = T[i2, i1] = -self.delta ** 2
        return T

    def row_sums(self) -> np.ndarray:
        """Diagonal of ``T^`` (row sums of ``T``)."""
        if self.kind == "nonneg":
            return self.T.sum(axis=1)
        out = np.ones(self.N)
        if self.kind == "toymodel":
            out[list(self.pair)] = 1 - self.delta ** 2
        return out

    def apply(self, W: np.ndarray) -> np.ndarray:
        """``V = T W`` for ``W`` of shape ``(..., N)``."""
        W = np.asarray(W, dtype=float)
        if self.kind == "iid":
            return W.copy()
        if self.kind == "nonneg":
            return W @ self.T.T
        i1, i2 = self.pair
        d2 = self.delta ** 2
        V = W.copy()
        V[..., i1] = W[..., i1] - d2 * W[..., i2]
        V[..., i2] = W[..., i2] - d2 * W[..., i1]
        return V

    def column_sum_form(self, s) -> np.ndarray:
        """``sum_j T_jk s_j`` for each ``k``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "nonneg":
            return s @ self.T
        return self.apply(s)  # T symmetric

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "toymodel":
            out.update(delta=self.delta, pair=list(self.pair))
        return out


def sample_potential(model: DisorderModel, stream: RngStream, m: int = 0, count: int | None = None) -> np.ndarray:
    """Potential(s) ``V = T W`` for sample ``m`` (or samples ``m .. m+count-1``)."""
    if count is None:
        return model.apply(cauchy_quantile(stream.sample(m, model.N)))
    return model.apply(cauchy_quantile(stream.uniforms(m, count, model.N)))


def joint_fourier(model: DisorderModel, s) -> float:
    """``E[exp(i sum_j s_j V_j)] = exp(-sum_k |sum_j T_jk s_j|)``."""
    return float(np.exp(-np.sum(np.abs(model.column_sum_form(s)))))


def nearest_neighbour_correlation(spec, weight: float) -> DisorderModel:
    """``T = 1 + weight * A`` with ``A`` the adjacency matrix, a nonnegative correlation example."""
    from .lattice import build_laplacian

    H0 = build_laplacian(spec).matrix
    A = -(H0 - np.diag(np.diag(H0)))
    return DisorderModel.nonneg(np.eye(spec.N) + weight * A)


def log_mgf_check(model: DisorderModel, s, samples: np.ndarray) -> tuple[float, float]:
    """Monte Carlo ``E[cos(s . V)]`` and its standard error from sampled ``V``."""
    x = np.cos(np.asarray(samples) @ np.asarray(s, dtype=float))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
