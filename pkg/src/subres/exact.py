"""Exact linear algebra over ``Fraction`` (and other exact rings).

Dense matrices are lists of row lists.  Sparse matrices are lists of row
dicts ``{column: value}`` with zero entries omitted; those are what the
linearization code uses, since the matrices there are mostly empty.
Sparse routines only need ``+``, ``*`` and truthiness of entries, so they
also work with :class:`subres.polynomial.Poly` entries.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Sequence

Sparse = List[Dict[int, object]]


# -- dense ---------------------------------------------------------------

def identity(n: int) -> List[List[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def matmul(a, b):
    m = len(b[0]) if b else 0
    out = []
    for row in a:
        acc = [Fraction(0)] * m
        for k, x in enumerate(row):
            if x:
                for j, y in enumerate(b[k]):
                    if y:
                        acc[j] += x * y
        out.append(acc)
    return out


def _rref(rows: List[List[Fraction]], ncols: int):
    """In-place reduced row echelon form; returns pivot columns."""
    pivots = []
    r = 0
    nrows = len(rows)
    for c in range(ncols):
        p = next((i for i in range(r, nrows) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(nrows):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return pivots


def inverse(a) -> List[List[Fraction]]:
    n = len(a)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    pivots = _rref(aug, n)
    if len(pivots) < n or pivots != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in aug]


def solve(a, b):
    """Solve ``a x = b`` for square nonsingular ``a``; ``b`` is a vector."""
    n = len(a)
    aug = [[Fraction(x) for x in row] + [Fraction(b[i])] for i, row in enumerate(a)]
    pivots = _rref(aug, n)
    if pivots != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n] for row in aug]


def rank(a) -> int:
    if not a:
        return 0
    rows = [[Fraction(x) for x in row] for row in a]
    return len(_rref(rows, len(rows[0])))


def det(a) -> Fraction:
    n = len(a)
    rows = [[Fraction(x) for x in row] for row in a]
    d = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if rows[i][c]), None)
        if p is None:
            return Fraction(0)
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            d = -d
        d *= rows[c][c]
        for i in range(c + 1, n):
            if rows[i][c]:
                f = rows[i][c] / rows[c][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    return d


def nullspace(a, ncols: Optional[int] = None) -> List[List[Fraction]]:
    """Basis of ``{x : a x = 0}``."""
    if ncols is None:
        ncols = len(a[0])
    rows = [[Fraction(x) for x in row] for row in a]
    pivots = _rref(rows, ncols) if rows else []
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -rows[r][f]
        basis.append(v)
    return basis


def row_space_basis(vectors: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    if not vectors:
        return []
    rows = [[Fraction(x) for x in v] for v in vectors]
    pivots = _rref(rows, len(rows[0]))
    return rows[: len(pivots)]


# -- sparse --------------------------------------------------------------

def sp_identity(n: int, one=Fraction(1)) -> Sparse:
    return [{i: one} for i in range(n)]


def sp_from_dense(a) -> Sparse:
    return [{j: x for j, x in enumerate(row) if x} for row in a]


def sp_to_dense(a: Sparse, ncols: int, zero=Fraction(0)):
    out = []
    for row in a:
        r = [zero] * ncols
        for j, x in row.items():
            r[j] = x
        out.append(r)
    return out


def sp_mul(a: Sparse, b: Sparse) -> Sparse:
    out = []
    for row in a:
        acc: Dict[int, object] = {}
        for k, x in row.items():
            for j, y in b[k].items():
                v = acc.get(j)
                acc[j] = x * y if v is None else v + x * y
        out.append({j: v for j, v in acc.items() if v})
    return out


def sp_add(a: Sparse, b: Sparse, cb=1) -> Sparse:
    out = []
    for ra, rb in zip(a, b):
        acc = dict(ra)
        for j, y in rb.items():
            v = acc.get(j)
            acc[j] = y * cb if v is None else v + y * cb
        out.append({j: v for j, v in acc.items() if v})
    return out


def sp_scale(a: Sparse, c) -> Sparse:
    out = []
    for row in a:
        out.append({j: x * c for j, x in row.items() if x * c})
    return out


def sp_is_zero(a: Sparse) -> bool:
    return not any(a)


def sp_exp_nilpotent(m: Sparse, max_terms: Optional[int] = None, one=Fraction(1)) -> Sparse:
    """``exp(m)`` for nilpotent ``m``; the series stops at the first vanishing power."""
    n = len(m)
    max_terms = n + 1 if max_terms is None else max_terms
    result = sp_identity(n, one)
    term = sp_identity(n, one)
    for k in range(1, max_terms + 1):
        term = sp_scale(sp_mul(term, m), Fraction(1, k))
        if sp_is_zero(term):
            return result
        result = sp_add(result, term)
    raise ArithmeticError("matrix is not nilpotent")


def sp_log_unipotent(u: Sparse, max_terms: Optional[int] = None, one=Fraction(1)) -> Sparse:
    """``log(u)`` for unipotent ``u`` via the finite series in ``u - 1``."""
    n = len(u)
    max_terms = n + 1 if max_terms is None else max_terms
    x = sp_add(u, sp_identity(n, one), -1)
    result = [dict() for _ in range(n)]
    power = sp_identity(n, one)
    for k in range(1, max_terms + 1):
        power = sp_mul(power, x)
        if sp_is_zero(power):
            return result
        c = Fraction(1, k) if k % 2 else Fraction(-1, k)
        result = sp_add(result, power, c)
    raise ArithmeticError("matrix is not unipotent")
