"""Finite complex Grassmann algebras and super-operations.

Elements are stored as a sparse map ``bitmask -> coefficient``.  Generator
``i`` (1-based) is bit ``i - 1`` of the mask, and every stored monomial is the
ordered product ``chi_{i1} chi_{i2} ...`` with ``i1 < i2 < ...``.

Coefficients are complex scalars or complex numpy arrays of a common
broadcastable shape.  Array coefficients let one element represent the same
superfunction evaluated at a whole batch of quadrature nodes, which is how the
integration code uses this module.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

MAX_GENERATORS = 64


class GrassmannError(ValueError):
    """Usage error in the Grassmann algebra (mismatched algebras, bad index)."""


class SingularBodyError(ArithmeticError):
    """Raised when an element or matrix with vanishing body must be inverted."""


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    return c == 0


def reorder_sign(a: int, b: int) -> int:
    """Sign of ``chi^a chi^b`` relative to the ordered monomial ``chi^(a|b)``.

    Counts pairs ``(i in a, j in b)`` with ``i > j``; ``a & b`` must be empty.
    """
    swaps = 0
    a >>= 1
    while a:
        swaps += _popcount(a & b)
        a >>= 1
    return -1 if swaps & 1 else 1


class GrassmannElement:
    """Immutable element of the Grassmann algebra with ``q`` generators."""

    __slots__ = ("_q", "_terms")
    # let array coefficients defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, q: int, terms: Mapping[int, object] | None = None):
        if not 0 <= q <= MAX_GENERATORS:
            raise GrassmannError(f"number of generators must be in [0, {MAX_GENERATORS}], got {q}")
        self._q = q
        clean = {}
        if terms:
            full = (1 << q) - 1
            for mask, c in terms.items():
                if mask & ~full or mask < 0:
                    raise GrassmannError(f"monomial {mask:#b} uses generators outside 1..{q}")
                if isinstance(c, np.ndarray):
                    c = c.astype(complex, copy=False)
                else:
                    c = complex(c)
                if not _is_zero(c):
                    clean[mask] = c
        self._terms = clean

    # -- construction -----------------------------------------------------
    @classmethod
    def scalar(cls, q: int, value) -> GrassmannElement:
        return cls(q, {0: value})

    @classmethod
    def generator(cls, q: int, i: int, coeff=1.0) -> GrassmannElement:
        if not 1 <= i <= q:
            raise GrassmannError(f"generator index {i} outside 1..{q}")
        return cls(q, {1 << (i - 1): coeff})

    @classmethod
    def monomial(cls, q: int, indices: Sequence[int], coeff=1.0) -> GrassmannElement:
        """Product ``coeff * chi_{i1} chi_{i2} ...`` in the given (any) order."""
        out = cls.scalar(q, coeff)
        for i in indices:
            out = out * cls.generator(q, i)
        return out

    # -- inspection -------------------------------------------------------
    @property
    def q(self) -> int:
        return self._q

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def coefficient(self, indices: Iterable[int]):
        mask = 0
        for i in indices:
            mask |= 1 << (i - 1)
        return self._terms.get(mask, 0.0)

    @property
    def body(self):
        return self._terms.get(0, 0.0)

    @property
    def nilpotent(self) -> GrassmannElement:
        return GrassmannElement(self._q, {m: c for m, c in self._terms.items() if m})

    def parity(self) -> int | None:
        """0 (even), 1 (odd), or None if the element is not homogeneous."""
        parities = {_popcount(m) & 1 for m in self._terms}
        if not parities:
            return 0
        if len(parities) == 1:
            return parities.pop()
        return None

    def is_zero(self) -> bool:
        return not self._terms

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> GrassmannElement:
        if isinstance(other, GrassmannElement):
            if other._q != self._q:
                raise GrassmannError(f"algebras differ: q={self._q} vs q={other._q}")
            return other
        return GrassmannElement.scalar(self._q, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms[m] + c if m in terms else c
        return GrassmannElement(self._q, terms)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self._q, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return wedge(self, other)
        return GrassmannElement(self._q, {m: c * other for m, c in self._terms.items()})

    def __rmul__(self, other):
        # scalars commute with everything
        return GrassmannElement(self._q, {m: other * c for m, c in self._terms.items()})

    def __truediv__(self, other):
        if isinstance(other, GrassmannElement):
            return self * inverse(other)
        return GrassmannElement(self._q, {m: c / other for m, c in self._terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise GrassmannError("only non-negative integer powers are supported")
        out = GrassmannElement.scalar(self._q, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self._q, other) if np.isscalar(other) else None
            if other is None:
                return NotImplemented
        if self._q != other._q or self._terms.keys() != other._terms.keys():
            return False
        return all(np.array_equal(c, other._terms[m]) for m, c in self._terms.items())

    __hash__ = None

    def allclose(self, other, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        other = self._coerce(other)
        for m in self._terms.keys() | other._terms.keys():
            a = self._terms.get(m, 0.0)
            b = other._terms.get(m, 0.0)
            if not np.allclose(a, b, atol=atol, rtol=rtol):
                return False
        return True

    def __repr__(self):
        if not self._terms:
            return f"GrassmannElement(q={self._q}, 0)"
        parts = []
        for m in sorted(self._terms, key=lambda m: (_popcount(m), m)):
            idx = [str(i + 1) for i in range(self._q) if m >> i & 1]
            mono = "chi" + ",".join(idx) if idx else "1"
            c = self._terms[m]
            parts.append(f"({c})*{mono}" if not isinstance(c, np.ndarray) else f"[array{c.shape}]*{mono}")
        return f"GrassmannElement(q={self._q}, " + " + ".join(parts) + ")"


def wedge(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """Exterior product ``a ∧ b``."""
    if a.q != b.q:
        raise GrassmannError(f"algebras differ: q={a.q} vs q={b.q}")
    out: dict[int, object] = {}
    for ma, ca in a._terms.items():
        for mb, cb in b._terms.items():
            if ma & mb:
                continue
            m = ma | mb
            c = ca * cb if reorder_sign(ma, mb) > 0 else -(ca * cb)
            out[m] = out[m] + c if m in out else c
    return GrassmannElement(a.q, out)


def _check_index(a: GrassmannElement, j: int) -> int:
    if not 1 <= j <= a.q:
        raise GrassmannError(f"generator index {j} outside 1..{a.q}")
    return 1 << (j - 1)


def derivative_left(a: GrassmannElement, j: int) -> GrassmannElement:
    """Left derivative: move ``chi_j`` to the front, then drop it."""
    bit = _check_index(a, j)
    below = bit - 1
    out = {}
    for m, c in a._terms.items():
        if m & bit:
            out[m & ~bit] = -c if _popcount(m & below) & 1 else c
    return GrassmannElement(a.q, out)


def derivative_right(a: GrassmannElement, j: int) -> GrassmannElement:
    """Right derivative: move ``chi_j`` to the back, then drop it."""
    bit = _check_index(a, j)
    above = ~((bit << 1) - 1)
    out = {}
    for m, c in a._terms.items():
        if m & bit:
            out[m & ~bit] = -c if _popcount(m & above) & 1 else c
    return GrassmannElement(a.q, out)


def berezin(a: GrassmannElement, indices: Iterable[int]) -> GrassmannElement:
    """Berezin integral ``∫ dchi_{i1} ... dchi_{ik} a``.

    The measure is an ordered product of anticommuting one-forms, so the
    innermost differential ``dchi_{ik}`` acts first.  ``indices`` are taken in
    the order given (sort them for the canonical ordered measure).
    """
    indices = list(indices)
    if len(set(indices)) != len(indices):
        return GrassmannElement(a.q)
    out = a
    for j in reversed(indices):
        out = derivative_left(out, j)
    return out


def top_coefficient(a: GrassmannElement, indices: Sequence[int]):
    """Body of ``berezin(a, indices)``; the workhorse of the integration code."""
    return berezin(a, indices).body


def nilpotency_order(n: GrassmannElement) -> int:
    """Smallest ``k`` with ``n**k == 0`` for an element with zero body."""
    if not _is_zero(n.body):
        raise GrassmannError("element has a nonzero body and is not nilpotent")
    # counts structurally, ignoring accidental numerical cancellation
    k, masks = 1, set(n._terms)
    power = set(masks)
    while power:
        k += 1
        power = {p | m for p in power for m in masks if not p & m}
    return k


def lift_function(derivatives: Sequence[Callable], a: GrassmannElement) -> GrassmannElement:
    """Extend a smooth scalar function to even elements by its finite Taylor sum.

    ``derivatives[k]`` evaluates the k-th derivative of the function at the
    body.  At least as many derivatives as the nilpotency order of the
    nilpotent part must be supplied.
    """
    if a.parity() != 0:
        raise GrassmannError("functions can only be lifted to even elements")
    n = a.nilpotent
    order = nilpotency_order(n) if not n.is_zero() else 1
    if len(derivatives) < order:
        raise GrassmannError(
            f"need derivatives up to order {order - 1}, got {len(derivatives)} callables")
    b = a.body
    out = GrassmannElement.scalar(a.q, derivatives[0](b))
    npow = GrassmannElement.scalar(a.q, 1.0)
    for k in range(1, order):
        npow = npow * n
        out = out + (derivatives[k](b) / math.factorial(k)) * npow
    return out


def exp_derivatives(order: int) -> list[Callable]:
    return [np.exp] * order


def exp(a: GrassmannElement) -> GrassmannElement:
    """``e^a`` for an even element."""
    n = a.nilpotent
    order = nilpotency_order(n) if not n.is_zero() else 1
    return lift_function(exp_derivatives(order), a)


def inverse(a: GrassmannElement) -> GrassmannElement:
    """Inverse of an element with invertible body (finite geometric series)."""
    b = a.body
    if np.any(np.asarray(b) == 0):
        raise SingularBodyError("element with zero body is not invertible")
    n = a.nilpotent
    out = GrassmannElement.scalar(a.q, 1.0 / b)
    term = out
    x = n * (-1.0 / b)
    while True:
        term = term * x
        if term.is_zero():
            break
        out = out + term
    return out


def grassmann_gaussian(M) -> complex:
    """``∫ dchibar dchi exp(-sum_ij chibar_i M_ij chi_j)`` evaluated symbolically.

    Generators are laid out per pair as ``chibar_j -> 2j-1``, ``chi_j -> 2j``.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise GrassmannError("matrix must be square")
    q = 2 * n
    # the bilinears are even and square to zero, so exp factorises exactly
    integrand = GrassmannElement.scalar(q, 1.0)
    for i in range(n):
        for j in range(n):
            if M[i, j] != 0:
                bil = GrassmannElement(q, {(1 << (2 * i)) | (1 << (2 * j + 1)): -M[i, j] * reorder_sign(1 << (2 * i), 1 << (2 * j + 1))})
                integrand = integrand * (1.0 + bil)
    return complex(top_coefficient(integrand, range(1, q + 1)))


# -- supermatrices ---------------------------------------------------------

def _matmul(X: Sequence[Sequence[GrassmannElement]], Y: Sequence[Sequence[GrassmannElement]], q: int):
    rows, inner = len(X), len(Y)
    cols = len(Y[0]) if inner else 0
    out = []
    for i in range(rows):
        row = []
        for k in range(cols):
            acc = GrassmannElement(q)
            for j in range(inner):
                acc = acc + X[i][j] * Y[j][k]
            row.append(acc)
        out.append(row)
    return out


def _matadd(X, Y, sign=1.0):
    return [[x + sign * y for x, y in zip(rx, ry)] for rx, ry in zip(X, Y)]


def even_det(X: Sequence[Sequence[GrassmannElement]], q: int) -> GrassmannElement:
    """Leibniz determinant of a square matrix with even (mutually commuting) entries."""
    n = len(X)
    out = GrassmannElement(q)
    if n == 0:
        return GrassmannElement.scalar(q, 1.0)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for a in range(n) for b in range(a + 1, n) if perm[a] > perm[b])
        term = GrassmannElement.scalar(q, -1.0 if inversions & 1 else 1.0)
        for i, p in enumerate(perm):
            term = term * X[i][p]
        out = out + term
    return out


def even_matrix_inverse(X: Sequence[Sequence[GrassmannElement]], q: int):
    """Inverse of an even matrix: body inverse plus a terminating Neumann series."""
    n = len(X)
    body = np.array([[complex(X[i][j].body) for j in range(n)] for i in range(n)])
    if n and abs(np.linalg.det(body)) == 0:
        raise SingularBodyError("body of the matrix is singular")
    binv = np.linalg.inv(body) if n else body
    Binv = [[GrassmannElement.scalar(q, binv[i, j]) for j in range(n)] for i in range(n)]
    N = [[X[i][j].nilpotent for j in range(n)] for i in range(n)]
    # X^{-1} = sum_k (-B^{-1} N)^k B^{-1}
    step = [[-e for e in row] for row in _matmul(Binv, N, q)]
    out = Binv
    term = Binv
    while True:
        term = _matmul(step, term, q)
        if all(e.is_zero() for row in term for e in row):
            return out
        out = _matadd(out, term)


class SuperMatrix:
    """Block supermatrix ``[[a, sigma], [rho, b]]`` of format ``(p|q)``.

    ``a`` (p x p) and ``b`` (r x r) hold even elements, ``sigma`` (p x r) and
    ``rho`` (r x p) odd ones.
    """

    def __init__(self, a, sigma, rho, b):
        self.a = [list(r) for r in a]
        self.sigma = [list(r) for r in sigma]
        self.rho = [list(r) for r in rho]
        self.b = [list(r) for r in b]
        elems = [e for blk in (self.a, self.sigma, self.rho, self.b) for r in blk for e in r]
        if not elems:
            raise GrassmannError("empty supermatrix")
        self.q = elems[0].q
        p, r = len(self.a), len(self.b)
        if len(self.sigma) != p or len(self.rho) != r:
            raise GrassmannError("inconsistent block shapes")
        for blk, par in ((self.a, 0), (self.b, 0), (self.sigma, 1), (self.rho, 1)):
            for row in blk:
                for e in row:
                    if e.q != self.q:
                        raise GrassmannError("blocks live in different algebras")
                    if not e.is_zero() and e.parity() != par:
                        raise GrassmannError("block entry has the wrong parity")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.a), len(self.b)

    def __matmul__(self, other: SuperMatrix) -> SuperMatrix:
        q = self.q
        a = _matadd(_matmul(self.a, other.a, q), _matmul(self.sigma, other.rho, q))
        s = _matadd(_matmul(self.a, other.sigma, q), _matmul(self.sigma, other.b, q))
        r = _matadd(_matmul(self.rho, other.a, q), _matmul(self.b, other.rho, q))
        b = _matadd(_matmul(self.rho, other.sigma, q), _matmul(self.b, other.b, q))
        return SuperMatrix(a, s, r, b)


def sdet(S: SuperMatrix) -> GrassmannElement:
    """Berezinian ``det(a - sigma b^{-1} rho) / det(b)``."""
    q = S.q
    binv = even_matrix_inverse(S.b, q)
    schur = _matadd(S.a, _matmul(_matmul(S.sigma, binv, q), S.rho, q), sign=-1.0)
    return even_det(schur, q) * inverse(even_det(S.b, q))
