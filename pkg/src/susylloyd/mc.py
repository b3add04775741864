"""Disorder averages of resolvent functionals with reproducible parallel streams.

Samples are grouped in fixed batches.  Each batch diagonalises its stack of
Hamiltonians at once and reduces to (count, mean, M2) using values shifted by a
common reference (sample 0), so a disorder-free run gives an exactly zero
standard error.  Batch moments are merged by Chan's formula in a fixed pairwise
tree, which makes the estimate independent of the thread count.
"""

from __future__ import annotations

import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .disorder import DisorderModel, RngStream, sample_potential
from .lattice import LatticeSpec, build_laplacian
from .resolvent import SpectralProbe

FUNCTIONALS = ("trace", "entry", "abs2", "genfun", "dos")


@dataclass(frozen=True)
class McPlan:
    """What to average and how many samples to draw.

    ``functional`` is one of ``trace``, ``entry`` (``G_jk``), ``abs2``
    (``|G_jk|^2``), ``genfun`` or ``dos`` (needs ``energies``).  With
    ``energies`` set, ``trace`` is evaluated on that grid instead of at ``E``.
    """

    samples: int
    seed: int
    functional: str = "trace"
    batch_size: int = 2000
    entries: tuple = ((0, 0),)
    energies: tuple | None = None
    stream: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("need at least 2 samples for a standard error")
        if self.functional not in FUNCTIONALS:
            raise ValueError(f"functional must be one of {FUNCTIONALS}")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.functional == "dos" and not self.energies:
            raise ValueError("dos functional needs an energy grid")


@dataclass(frozen=True)
class McEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int
    meta: dict = field(default_factory=dict)

    def scalar(self) -> tuple:
        return complex(self.mean[0]) if np.iscomplexobj(self.mean) else float(self.mean[0]), self.stderr[0]

    def z_scores(self, exact) -> np.ndarray:
        """Componentwise deviations in units of the standard error (real and imaginary parts)."""
        exact = np.broadcast_to(np.asarray(exact), self.mean.shape)
        diff = self.mean - exact
        se = self.stderr

        # zero-variance estimates compare at roundoff level
        floor = 1e-12 * (np.abs(self.mean) + np.abs(exact))

        def ratio(d, s):
            d, s = np.abs(d), np.asarray(s, dtype=float)
            return np.where(s > 0, d / np.where(s > 0, s, 1), np.where(d > floor, np.inf, 0.0))

        if np.iscomplexobj(self.mean):
            return np.maximum(ratio(diff.real, se.real), ratio(diff.imag, se.imag))
        return ratio(diff, se)

    def within(self, exact, k: float = 3.0) -> np.ndarray:
        return self.z_scores(exact) <= k


def _functional(plan: McPlan, probe: SpectralProbe) -> Callable[[np.ndarray, np.ndarray | None], np.ndarray]:
    z = probe.z
    f = plan.functional
    if f == "trace":
        if plan.energies is None:
            return lambda e, U: np.sum(1.0 / (z - e), axis=1)[:, None]
        zs = np.asarray(plan.energies, dtype=float) + 1j * probe.eps
        return lambda e, U: np.sum(1.0 / (zs[None, :, None] - e[:, None, :]), axis=2)
    if f == "genfun":
        if probe.E_tilde is None:
            raise ValueError("genfun needs E_tilde")
        zt = complex(probe.E_tilde, probe.eps)
        return lambda e, U: np.exp(np.sum(np.log((z - e) / (zt - e)), axis=1))[:, None]
    if f == "dos":
        E = np.asarray(plan.energies, dtype=float)

        def dos(e, U):
            N = e.shape[1]
            w = E[None, :, None] + 1j * probe.eps - e[:, None, :]
            return -np.sum(1.0 / w, axis=2).imag / (np.pi * N)

        return dos
    jk = np.array(plan.entries, dtype=int)

    def entry(e, U):
        g = np.sum(U[:, jk[:, 0], :] * U[:, jk[:, 1], :] / (z - e)[:, None, :], axis=2)
        return g if f == "entry" else np.abs(g) ** 2

    return entry


def _batch_moments(x: np.ndarray, ref: np.ndarray):
    y = x - ref
    n = y.shape[0]
    mean = y.mean(axis=0)
    if np.iscomplexobj(y):
        d = y - mean
        m2 = np.sum(d.real ** 2, axis=0) + 1j * np.sum(d.imag ** 2, axis=0)
    else:
        m2 = np.sum((y - mean) ** 2, axis=0)
    return n, mean, m2


def _merge(a, b):
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    d = mb - ma
    mean = ma + d * (nb / n)
    w = na * nb / n
    if np.iscomplexobj(d):
        m2 = sa + sb + w * (d.real ** 2 + 1j * d.imag ** 2)
    else:
        m2 = sa + sb + w * d ** 2
    return n, mean, m2


def _tree_reduce(parts: list):
    while len(parts) > 1:
        nxt = [_merge(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def mc_average(plan: McPlan, spec: LatticeSpec, model: DisorderModel, probe: SpectralProbe, *,
               threads: int = 1, progress: bool = False) -> McEstimate:
    """Average the plan's functional of ``G(E + i eps)`` over the disorder."""
    if model.N != spec.N:
        raise ValueError("disorder model and lattice have different sizes")
    H0 = np.array(build_laplacian(spec).matrix)
    lam = probe.lam
    rng = RngStream(plan.seed, plan.stream)
    func = _functional(plan, probe)
    need_vectors = plan.functional in ("entry", "abs2")
    idx = np.arange(spec.N)

    def evaluate(start: int, count: int) -> np.ndarray:
        V = sample_potential(model, rng, start, count)
        H = np.broadcast_to(H0, (count,) + H0.shape).copy()
        H[:, idx, idx] += lam * V
        if need_vectors:
            e, U = np.linalg.eigh(H)
        else:
            e, U = np.linalg.eigvalsh(H), None
        return func(e, U)

    ref = evaluate(0, 1)[0]
    starts = list(range(0, plan.samples, plan.batch_size))
    done = [0]

    def batch(s):
        out = _batch_moments(evaluate(s, min(plan.batch_size, plan.samples - s)), ref)
        if progress:
            done[0] += 1
            print(f"\rmc: batch {done[0]}/{len(starts)}", end="", file=sys.stderr, flush=True)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(batch, starts))
    else:
        parts = [batch(s) for s in starts]
    if progress:
        print(file=sys.stderr)
    n, mean, m2 = _tree_reduce(parts)
    mean = mean + ref
    if np.iscomplexobj(m2):
        se = np.sqrt(m2.real / (n - 1) / n) + 1j * np.sqrt(m2.imag / (n - 1) / n)
    else:
        se = np.sqrt(m2 / (n - 1) / n)
    return McEstimate(mean, se, n, plan.seed, {"functional": plan.functional})


def mc_dos(plan: McPlan, spec: LatticeSpec, model: DisorderModel, energies, eps: float, lam: float, *,
           threads: int = 1) -> McEstimate:
    """Averaged DOS on an energy grid; each disorder draw serves every energy."""
    p = McPlan(plan.samples, plan.seed, "dos", plan.batch_size, plan.entries, tuple(float(e) for e in energies),
               plan.stream)
    return mc_average(p, spec, model, SpectralProbe(0.0, eps, lam), threads=threads)


def mc_trace_grid(plan: McPlan, spec: LatticeSpec, model: DisorderModel, energies, eps: float, lam: float, *,
                  threads: int = 1) -> McEstimate:
    """``E[Tr G(E + i eps)]`` on an energy grid with common random numbers."""
    p = McPlan(plan.samples, plan.seed, "trace", plan.batch_size, plan.entries, tuple(float(e) for e in energies),
               plan.stream)
    return mc_average(p, spec, model, SpectralProbe(0.0, eps, lam), threads=threads)
