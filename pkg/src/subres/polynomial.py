"""Sparse multivariate polynomials.

A polynomial in ``n`` variables is a plain ``dict`` mapping exponent tuples
(length ``n``) to nonzero coefficients.  Coefficients can be anything that
supports ``+``, ``*`` and truthiness: ``Fraction`` for the exact algebra,
``float`` for numerics, or :class:`Poly` itself for symbolic work.

The functions here never mutate their arguments.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

Exps = Tuple[int, ...]
PolyDict = Dict[Exps, object]


def zero_exps(n: int) -> Exps:
    return (0,) * n


def unit_exps(i: int, n: int) -> Exps:
    e = [0] * n
    e[i] = 1
    return tuple(e)


def constant(c, n: int) -> PolyDict:
    return {zero_exps(n): c} if c else {}


def variable(i: int, n: int, c=1) -> PolyDict:
    return {unit_exps(i, n): c}


def degree(p: PolyDict) -> int:
    return max((sum(e) for e in p), default=-1)


def add(p: PolyDict, q: PolyDict) -> PolyDict:
    out = dict(p)
    for e, c in q.items():
        v = out.get(e)
        if v is None:
            out[e] = c
        else:
            v = v + c
            if v:
                out[e] = v
            else:
                del out[e]
    return out


def scale(p: PolyDict, c) -> PolyDict:
    if not c:
        return {}
    out = {}
    for e, v in p.items():
        w = v * c
        if w:
            out[e] = w
    return out


def sub(p: PolyDict, q: PolyDict) -> PolyDict:
    return add(p, scale(q, -1))


def mul(p: PolyDict, q: PolyDict, max_degree: Optional[int] = None) -> PolyDict:
    out: PolyDict = {}
    for e1, c1 in p.items():
        d1 = sum(e1)
        for e2, c2 in q.items():
            if max_degree is not None and d1 + sum(e2) > max_degree:
                continue
            e = tuple(a + b for a, b in zip(e1, e2))
            v = out.get(e)
            out[e] = c1 * c2 if v is None else v + c1 * c2
    return {e: c for e, c in out.items() if c}


def power(p: PolyDict, k: int, n: int, max_degree: Optional[int] = None) -> PolyDict:
    result = constant(1, n)
    for _ in range(k):
        result = mul(result, p, max_degree)
    return result


def compose(
    p: PolyDict,
    subs: Sequence[PolyDict],
    n_out: int,
    max_degree: Optional[int] = None,
    cache: Optional[dict] = None,
) -> PolyDict:
    """Substitute ``subs[j]`` for the j-th variable of ``p``.

    ``n_out`` is the number of variables of the substituted polynomials.
    ``cache`` may be shared across calls with the same ``subs`` to reuse
    powers ``subs[j]**k``.
    """
    if cache is None:
        cache = {}

    def pw(j: int, k: int) -> PolyDict:
        key = (j, k)
        if key not in cache:
            if k == 0:
                cache[key] = constant(1, n_out)
            else:
                cache[key] = mul(pw(j, k - 1), subs[j], max_degree)
        return cache[key]

    out: PolyDict = {}
    for e, c in p.items():
        term: PolyDict = constant(c, n_out)
        for j, k in enumerate(e):
            if k:
                term = mul(term, pw(j, k), max_degree)
                if not term:
                    break
        out = add(out, term)
    return out


def evaluate(p: PolyDict, point: Sequence):
    total = 0
    for e, c in p.items():
        t = c
        for x, k in zip(point, e):
            if k:
                t = t * x**k
        total = total + t
    return total


def derivative(p: PolyDict, i: int) -> PolyDict:
    out = {}
    for e, c in p.items():
        k = e[i]
        if k:
            f = list(e)
            f[i] = k - 1
            out[tuple(f)] = c * k
    return out


def truncate(p: PolyDict, max_degree: int) -> PolyDict:
    return {e: c for e, c in p.items() if sum(e) <= max_degree}


def homogeneous_part(p: PolyDict, d: int) -> PolyDict:
    return {e: c for e, c in p.items() if sum(e) == d}


def monomials_of_degree(n: int, d: int) -> Iterable[Exps]:
    """All exponent vectors of total degree ``d``, in lexicographic order."""
    if n == 0:
        if d == 0:
            yield ()
        return
    for k in range(d, -1, -1):
        for rest in monomials_of_degree(n - 1, d - k):
            yield (k,) + rest


def to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        return Fraction(c)
    return Fraction(c)


class Poly:
    """Thin ring-element wrapper around a polynomial dict.

    Used as a matrix entry type when linear algebra has to be carried out
    with symbolic (polynomial) coefficients.
    """

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: PolyDict, nvars: int):
        self.terms = terms
        self.nvars = nvars

    @classmethod
    def var(cls, i: int, n: int) -> "Poly":
        return cls(variable(i, n, Fraction(1)), n)

    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly(constant(other, self.nvars), self.nvars)

    def __add__(self, other):
        return Poly(add(self.terms, self._lift(other).terms), self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Poly(scale(self.terms, -1), self.nvars)

    def __sub__(self, other):
        return Poly(sub(self.terms, self._lift(other).terms), self.nvars)

    def __rsub__(self, other):
        return Poly(sub(self._lift(other).terms, self.terms), self.nvars)

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(mul(self.terms, other.terms), self.nvars)
        return Poly(scale(self.terms, other), self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Poly(scale(self.terms, Fraction(1) / other), self.nvars)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        return self.terms == constant(other, self.nvars)

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"Poly({self.terms!r})"
