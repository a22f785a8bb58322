"""Nilpotent Lie algebra of subresonant vector fields, BCH and coset charts.

A vector field ``X = sum_i X_i d/dx_i`` on a weighted space is stored like a
map: ``comps[i]`` is the polynomial ``X_i``.  The term ``c m d/dx_i`` has
weight ``wt(m) - lambda_i``.  Admissible fields have every term of weight
``< 0``, or of weight ``0`` with ``m`` nonlinear (these are nilpotent too and
are needed to take logarithms of unipotent resonant maps).  Fields whose
terms all have weight ``< 0`` are called *strict*; they form the Lie algebra
of ``id + Poly(V, V)^{<0}``.

Products use the composition of time-1 flows with the first factor applied
first: ``bch(X, Y) = log(exp(Y) o exp(X)) = X + Y + [X, Y]/2 + ...`` where
``[X, Y] = X(Y) - Y(X)`` is the usual bracket of vector fields.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exact
from . import polynomial as P
from .errors import ClassViolation, DivergenceError, SpaceMismatch
from .linz import derivation_rows, enumerate_basis, linearize
from .rng import SplitMix64
from .sralg import (PolyMap, WeightedSpace, compose_unchecked, invert_ssr, is_unipotent,
                    monomial_weight, monomials_up_to, parse_text)

Exps = Tuple[int, ...]
Slot = Tuple[int, Exps]


def _admissible(space: WeightedSpace, i: int, m: Exps, strict: bool) -> bool:
    d = monomial_weight(m, space) - space.weights[i]
    if d < 0:
        return True
    return d == 0 and sum(m) >= 2 and not strict


@functools.lru_cache(maxsize=None)
def lie_slots(space: WeightedSpace, strict: bool = True) -> Tuple[Slot, ...]:
    """Monomial basis ``(i, m)`` of the Lie algebra, deepest weight last.

    Sorted by term weight descending (closest to zero first), then by
    component and exponents, so the order is canonical.
    """
    slots = []
    for i, lam in enumerate(space.weights):
        for m in monomials_up_to(space, lam):
            if _admissible(space, i, m, strict):
                slots.append((i, m))
    slots.sort(key=lambda s: (-(monomial_weight(s[1], space) - space.weights[s[0]]), s[0], s[1]))
    return tuple(slots)


def slot_weight(space: WeightedSpace, slot: Slot) -> Fraction:
    i, m = slot
    return monomial_weight(m, space) - space.weights[i]


class SsrVectorField:
    __slots__ = ("space", "comps")

    def __init__(self, space: WeightedSpace, comps: Sequence[Dict[Exps, object]], strict: bool = False):
        if len(comps) != space.dim:
            raise SpaceMismatch("wrong number of components")
        clean = []
        for i, comp in enumerate(comps):
            d = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != space.dim:
                    raise SpaceMismatch("bad exponent length")
                c = Fraction(c)
                if not c:
                    continue
                if not _admissible(space, i, e, strict):
                    raise ClassViolation(f"term {e} d/d{space.coords[i]} has non-negative weight")
                d[e] = c
            clean.append(d)
        self.space = space
        self.comps = tuple(clean)

    @classmethod
    def zero(cls, space: WeightedSpace) -> "SsrVectorField":
        return cls(space, [{} for _ in range(space.dim)])

    @classmethod
    def from_slots(cls, space: WeightedSpace, coeffs: Dict[Slot, object]) -> "SsrVectorField":
        comps: List[Dict[Exps, object]] = [{} for _ in range(space.dim)]
        for (i, m), c in coeffs.items():
            comps[i][m] = c
        return cls(space, comps)

    @classmethod
    def from_text(cls, text: str, space: WeightedSpace) -> "SsrVectorField":
        """Same grammar as maps: ``x <- 1/2 * y^2 ; y <- z`` means ``y^2/2 d/dx + z d/dy``."""
        F = parse_text(text, space)
        return cls(space, F.comps)

    def to_text(self) -> str:
        return PolyMap(self.space, self.space, self.comps).to_text()

    def to_json(self) -> dict:
        d = PolyMap(self.space, self.space, self.comps).to_json()
        del d["target"]
        return d

    def slots(self) -> Dict[Slot, Fraction]:
        return {(i, e): c for i, comp in enumerate(self.comps) for e, c in comp.items()}

    def vector(self, slots: Sequence[Slot]) -> List[Fraction]:
        s = self.slots()
        if any(k not in set(slots) for k in s):
            raise ClassViolation("field has terms outside the given slot basis")
        return [s.get(k, Fraction(0)) for k in slots]

    def is_strict(self) -> bool:
        return all(slot_weight(self.space, k) < 0 for k in self.slots())

    def weights(self) -> List[Fraction]:
        return sorted({slot_weight(self.space, k) for k in self.slots()}, reverse=True)

    def __bool__(self):
        return any(self.comps)

    def __eq__(self, other):
        if not isinstance(other, SsrVectorField):
            return NotImplemented
        return self.space == other.space and self.comps == other.comps

    def __hash__(self):
        return hash((self.space, tuple(frozenset(c.items()) for c in self.comps)))

    def __repr__(self):
        return f"SsrVectorField({self.to_text()!r})"

    def _check(self, other):
        if not isinstance(other, SsrVectorField) or other.space != self.space:
            raise SpaceMismatch("vector fields live on different spaces")

    def __add__(self, other):
        self._check(other)
        return SsrVectorField(self.space, [P.add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        self._check(other)
        return SsrVectorField(self.space, [P.sub(a, b) for a, b in zip(self.comps, other.comps)])

    def __neg__(self):
        return self.scaled(-1)

    def scaled(self, c) -> "SsrVectorField":
        return SsrVectorField(self.space, [P.scale(a, Fraction(c)) for a in self.comps])

    __rmul__ = scaled


def combination(space: WeightedSpace, basis: Sequence[SsrVectorField], coeffs: Sequence) -> SsrVectorField:
    out: List[Dict[Exps, object]] = [{} for _ in range(space.dim)]
    for X, c in zip(basis, coeffs):
        if c:
            out = [P.add(a, P.scale(b, Fraction(c))) for a, b in zip(out, X.comps)]
    return SsrVectorField(space, out)


# -- bracket, exp, log, bch -----------------------------------------------------

def _apply_field(comps: Sequence[dict], p: dict) -> dict:
    """Derivative of the polynomial ``p`` along the field with components ``comps``."""
    out: dict = {}
    for j, Xj in enumerate(comps):
        if Xj:
            dp = P.derivative(p, j)
            if dp:
                out = P.add(out, P.mul(Xj, dp))
    return out


def bracket(X: SsrVectorField, Y: SsrVectorField) -> SsrVectorField:
    """``[X, Y]_i = X(Y_i) - Y(X_i)``."""
    X._check(Y)
    comps = [P.sub(_apply_field(X.comps, Yi), _apply_field(Y.comps, Xi)) for Xi, Yi in zip(X.comps, Y.comps)]
    return SsrVectorField(X.space, comps)


def nilpotency_bound(space: WeightedSpace) -> int:
    """Upper bound on the length of non-vanishing bracket chains of strict fields.

    Every strict term has weight ``<= -g`` with ``g`` the finest positive
    gap, and no term is deeper than ``-lambda_1``.
    """
    w = set(space.weights) | {Fraction(0)}
    gaps = [a - b for a in w for b in w if a > b]
    levels = {monomial_weight(m, space) for m in monomials_up_to(space, space.top_weight)}
    gaps += [a - b for a in levels for b in levels if a > b]
    g = min(gaps)
    return int(space.top_weight / g) + 1


def _vec_mat(v: Dict[int, object], rows: Sequence[Dict[int, object]]) -> Dict[int, object]:
    acc: Dict[int, object] = {}
    for k, x in v.items():
        for j, y in rows[k].items():
            t = acc.get(j)
            acc[j] = x * y if t is None else t + x * y
    return {j: t for j, t in acc.items() if t}


def _exp_coordinate_rows(M, basis, one=Fraction(1)) -> List[Dict[Exps, object]]:
    """Coordinate rows of ``exp(M)``: the pulled-back coordinate functions."""
    comps = []
    for k in basis.coordinate_rows():
        term = {k: one}
        acc = dict(term)
        for j in range(1, len(basis) + 2):
            term = _vec_mat(term, M)
            if not term:
                break
            term = {a: b * Fraction(1, j) for a, b in term.items()}
            for a, b in term.items():
                t = acc.get(a)
                acc[a] = b if t is None else t + b
        else:
            raise ArithmeticError("derivation matrix is not nilpotent")
        comps.append({basis.monomials[a]: b for a, b in acc.items() if b})
    return comps


def _log_coordinate_rows(U, basis, one=Fraction(1)) -> List[Dict[Exps, object]]:
    """Coordinate rows of ``log(U)`` for unipotent ``U``."""
    n = len(basis)
    N = exact.sp_add(U, exact.sp_identity(n, one), -1)
    comps = []
    for k in basis.coordinate_rows():
        power = {k: one}
        acc: Dict[int, object] = {}
        for j in range(1, n + 2):
            power = _vec_mat(power, N)
            if not power:
                break
            c = Fraction(1, j) if j % 2 else Fraction(-1, j)
            for a, b in power.items():
                t = acc.get(a)
                acc[a] = b * c if t is None else t + b * c
        else:
            raise ArithmeticError("matrix is not unipotent")
        comps.append({basis.monomials[a]: b for a, b in acc.items() if b})
    return comps


def exp_ssr(X: SsrVectorField) -> PolyMap:
    """Time-one flow of ``X``, via the nilpotent matrix exponential on ``L_V``."""
    if not isinstance(X, SsrVectorField):
        raise ClassViolation("exp_ssr expects an SsrVectorField")
    B = enumerate_basis(X.space)
    M = derivation_rows(X.comps, B)
    return PolyMap(X.space, X.space, _exp_coordinate_rows(M, B))


def log_ssr(F: PolyMap) -> SsrVectorField:
    """Inverse of :func:`exp_ssr` on unipotent subresonant maps."""
    if not is_unipotent(F):
        raise ClassViolation(f"map is not strictly subresonant: {F.to_text()}")
    L = linearize(F)
    return SsrVectorField(F.source, _log_coordinate_rows(list(L.rows), L.basis_src))


def _bch_comps(Xc, Yc, basis, one=Fraction(1)):
    MX = derivation_rows(Xc, basis)
    MY = derivation_rows(Yc, basis)
    EX = exact.sp_exp_nilpotent(MX, len(basis) + 1, one)
    EY = exact.sp_exp_nilpotent(MY, len(basis) + 1, one)
    return _log_coordinate_rows(exact.sp_mul(EY, EX), basis, one)


def bch(X: SsrVectorField, Y: SsrVectorField) -> SsrVectorField:
    """``log(exp(Y) o exp(X))``; first-order terms ``X + Y + [X, Y]/2``."""
    X._check(Y)
    B = enumerate_basis(X.space)
    return SsrVectorField(X.space, _bch_comps(X.comps, Y.comps, B))


def bch_series(X: SsrVectorField, Y: SsrVectorField, order: Optional[int] = None) -> SsrVectorField:
    """Truncated Dynkin series up to degree ``order`` (default: nilpotency bound).

    Independent of the matrix route; used as a cross-check.  Implemented by
    the recursion for the homogeneous components ``Z_n`` of the Goldberg
    form through the identity ``Z = log(e^X e^Y)`` computed in a free
    truncated setting: we simply expand the series of ``log`` and ``exp``
    on words, then map words to iterated compositions of derivations.
    """
    order = nilpotency_bound(X.space) + 1 if order is None else order
    # words in the letters 0 (X) and 1 (Y) with rational coefficients;
    # exp(Y) o exp(X) pulls back as exp(D_X) exp(D_Y) on functions, so the
    # operator product is ``e^{D_X} e^{D_Y}`` acting on the right.
    def exp_words(letter):
        out = {(): Fraction(1)}
        w = ()
        for k in range(1, order + 1):
            w = w + (letter,)
            out[w] = Fraction(1, math.factorial(k))
        return out

    def wmul(a, b):
        out = {}
        for u, c in a.items():
            for v, d in b.items():
                if len(u) + len(v) <= order:
                    out[u + v] = out.get(u + v, Fraction(0)) + c * d
        return {k: v for k, v in out.items() if v}

    g = wmul(exp_words(0), exp_words(1))
    g.pop(())
    logw: Dict[tuple, Fraction] = {}
    power = {(): Fraction(1)}
    for k in range(1, order + 1):
        power = wmul(power, g)
        c = Fraction(1, k) if k % 2 else Fraction(-1, k)
        for w, v in power.items():
            logw[w] = logw.get(w, Fraction(0)) + c * v
    # the word series is a Lie element; evaluate it on the coordinate
    # functions with D_X, D_Y applied left to right
    comps = []
    n = X.space.dim
    for i in range(n):
        total: dict = {}
        for w, c in logw.items():
            if not c:
                continue
            p = P.variable(i, n, Fraction(1))
            for letter in reversed(w):
                p = _apply_field((X if letter == 0 else Y).comps, p)
                if not p:
                    break
            total = P.add(total, P.scale(p, c))
        comps.append(total)
    return SsrVectorField(X.space, comps)


# -- subalgebras and transversal charts ----------------------------------------

@dataclass(frozen=True)
class Subalgebra:
    """Span of strict fields, verified linearly independent and bracket closed."""

    space: WeightedSpace
    basis: Tuple[SsrVectorField, ...]

    def __post_init__(self):
        for X in self.basis:
            if X.space != self.space:
                raise SpaceMismatch("basis element on another space")
            if not X.is_strict():
                raise ClassViolation("subalgebra elements must be strict")
        slots = lie_slots(self.space)
        vecs = [X.vector(slots) for X in self.basis]
        if exact.rank(vecs) != len(vecs):
            raise ClassViolation("subalgebra basis is linearly dependent")
        for a in range(len(self.basis)):
            for b in range(a + 1, len(self.basis)):
                Z = bracket(self.basis[a], self.basis[b])
                if self.coordinates(Z) is None:
                    raise ClassViolation(f"bracket of basis elements {a},{b} leaves the span")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coordinates(self, X: SsrVectorField) -> Optional[List[Fraction]]:
        """Coefficients of ``X`` in the basis, or None if ``X`` is not in the span."""
        slots = lie_slots(self.space)
        if not self.basis:
            return [] if not X else None
        A = [X_.vector(slots) for X_ in self.basis]
        target = X.vector(slots)
        # solve c A = target (rows of A are basis vectors)
        k = len(A)
        aug = [[A[r][s] for r in range(k)] + [target[s]] for s in range(len(slots))]
        piv = exact._rref(aug, k + 1)
        if k in piv:
            return None
        c = [Fraction(0)] * k
        for r, p in enumerate(piv):
            c[p] = aug[r][k]
        return c

    def contains(self, X: SsrVectorField) -> bool:
        return self.coordinates(X) is not None

    def element(self, coeffs: Sequence) -> SsrVectorField:
        return combination(self.space, self.basis, coeffs)

    def to_json(self) -> dict:
        return {"space": self.space.to_json(), "basis": [X.to_text() for X in self.basis]}


def generated_subalgebra(gens: Sequence[SsrVectorField]) -> Subalgebra:
    """Smallest subalgebra containing ``gens`` (helper for tests and configs)."""
    if not gens:
        raise ValueError("need at least one generator")
    space = gens[0].space
    slots = lie_slots(space)
    basis: List[SsrVectorField] = []
    vecs: List[List[Fraction]] = []

    def add(X):
        if not X:
            return False
        v = X.vector(slots)
        if exact.rank(vecs + [v]) > len(vecs):
            basis.append(X)
            vecs.append(v)
            return True
        return False

    for g in gens:
        add(g)
    changed = True
    while changed:
        changed = False
        for a in range(len(basis)):
            for b in range(a + 1, len(basis)):
                if add(bracket(basis[a], basis[b])):
                    changed = True
    return Subalgebra(space, tuple(basis))


class TransversalChart:
    """Adapted basis ``v_1..v_p, u_1..u_q`` of the strict algebra and the chart ``ch``.

    The transversal is built per weight level: inside each graded piece it
    is the orthogonal complement (standard inner product on the slot basis)
    of the leading parts of the subalgebra.  Chart coordinates carry the
    positive weights ``mu = -weight``; they are ordered by ``mu`` descending so
    that the coordinate space is a :class:`WeightedSpace`.
    """

    def __init__(self, subalgebra: Subalgebra, transversal: Optional[Sequence[SsrVectorField]] = None):
        self.subalgebra = subalgebra
        space = subalgebra.space
        self.space = space
        slots = lie_slots(space)
        self.slots = slots
        sw = [slot_weight(space, s) for s in slots]
        levels = sorted(set(sw), reverse=True)
        # echelon form of u+ with columns ordered from shallow to deep weight
        U = [X.vector(slots) for X in subalgebra.basis]
        rows = [list(r) for r in U]
        piv = exact._rref(rows, len(slots)) if rows else []
        u_vecs = rows[: len(piv)]
        u_wts = [sw[p] for p in piv]
        if transversal is None:
            v_vecs, v_wts = [], []
            for lev in levels:
                cols = [k for k in range(len(slots)) if sw[k] == lev]
                lead = [[r[k] for k in cols] for r, w in zip(u_vecs, u_wts) if w == lev]
                comp = exact.nullspace(lead, len(cols)) if lead else [
                    [Fraction(int(a == b)) for a in range(len(cols))] for b in range(len(cols))]
                for c in comp:
                    full = [Fraction(0)] * len(slots)
                    for k, x in zip(cols, c):
                        full[k] = x
                    v_vecs.append(full)
                    v_wts.append(lev)
        else:
            v_vecs = [X.vector(slots) for X in transversal]
            v_wts = []
            for v in v_vecs:
                nz = [sw[k] for k, x in enumerate(v) if x]
                if not nz:
                    raise ClassViolation("zero vector in transversal")
                v_wts.append(max(nz))
        self._validate(v_vecs, v_wts, u_vecs, u_wts, sw, levels)
        # chart coordinates: sort all adapted vectors by mu descending (weight ascending)
        entries = [(w, 0, k) for k, w in enumerate(v_wts)] + [(w, 1, k) for k, w in enumerate(u_wts)]
        entries.sort(key=lambda t: (t[0], t[1], t[2]))
        self.order = entries
        self.vectors = [v_vecs[k] if kind == 0 else u_vecs[k] for _, kind, k in entries]
        self.is_v = [kind == 0 for _, kind, _ in entries]
        mus = [-w for w, _, _ in entries]
        names = [f"{'v' if kind == 0 else 'u'}{k + 1}" for _, kind, k in entries]
        self.chart_space = WeightedSpace(tuple(names), tuple(mus))
        self.v_index = [a for a, f in enumerate(self.is_v) if f]
        self.u_index = [a for a, f in enumerate(self.is_v) if not f]
        self.transversal = tuple(SsrVectorField.from_slots(space, dict(zip(slots, v))) for v in v_vecs)
        self.u_basis = tuple(SsrVectorField.from_slots(space, dict(zip(slots, u))) for u in u_vecs)
        self._Pinv = exact.inverse(self.vectors)
        self._ch: Optional[PolyMap] = None
        self._ch_inv: Optional[PolyMap] = None

    @staticmethod
    def _validate(v_vecs, v_wts, u_vecs, u_wts, sw, levels):
        n = len(sw)
        if len(v_vecs) + len(u_vecs) != n or exact.rank(v_vecs + u_vecs) != n:
            raise ClassViolation("transversal is not complementary to the subalgebra")
        for lev in levels:
            deep = [k for k in range(n) if sw[k] <= lev]
            dv = sum(1 for w in v_wts if w <= lev)
            du = sum(1 for w in u_wts if w <= lev)
            if dv + du != len(deep):
                raise ClassViolation(f"transversal is not compatible with the filtration at weight {lev}")
            # elements claimed to be at depth <= lev must actually live there
        for v, w in zip(v_vecs, v_wts):
            if any(x and sw[k] > w for k, x in enumerate(v)):
                raise ClassViolation("transversal vector has components above its weight")

    @property
    def dim(self) -> int:
        return len(self.vectors)

    def element(self, coords: Sequence) -> SsrVectorField:
        """Field with the given chart coordinates."""
        vec = [sum((Fraction(c) * v[s] for c, v in zip(coords, self.vectors)), Fraction(0))
               for s in range(len(self.slots))]
        return SsrVectorField.from_slots(self.space, dict(zip(self.slots, vec)))

    def coordinates(self, X: SsrVectorField) -> List[Fraction]:
        vec = X.vector(self.slots)
        return [sum((vec[s] * self._Pinv[s][a] for s in range(len(vec))), Fraction(0)) for a in range(self.dim)]

    def split(self, coords: Sequence) -> Tuple[List[Fraction], List[Fraction]]:
        return [coords[a] for a in self.v_index], [coords[a] for a in self.u_index]

    def join(self, v: Sequence, u: Sequence) -> List[Fraction]:
        out = [Fraction(0)] * self.dim
        for a, x in zip(self.v_index, v):
            out[a] = Fraction(x)
        for a, x in zip(self.u_index, u):
            out[a] = Fraction(x)
        return out

    def chart_map(self) -> PolyMap:
        """``ch`` as a polynomial map of the chart space, built symbolically."""
        if self._ch is None:
            N = self.dim
            one = P.Poly(P.constant(Fraction(1), N), N)
            t = [P.Poly.var(a, N) for a in range(N)]

            def symbolic(indices):
                comps = [dict() for _ in range(self.space.dim)]
                for s, (i, m) in enumerate(self.slots):
                    acc = None
                    for a in indices:
                        c = self.vectors[a][s]
                        if c:
                            acc = t[a] * c if acc is None else acc + t[a] * c
                    if acc:
                        comps[i][m] = acc
                return comps

            B = enumerate_basis(self.space)
            Z = _bch_comps(symbolic(self.v_index), symbolic(self.u_index), B, one)
            slot_pos = {s: k for k, s in enumerate(self.slots)}
            vec = [None] * len(self.slots)
            for i, comp in enumerate(Z):
                for m, c in comp.items():
                    vec[slot_pos[(i, m)]] = c
            comps = []
            for a in range(N):
                acc: dict = {}
                for s, c in enumerate(vec):
                    if c is not None and self._Pinv[s][a]:
                        acc = P.add(acc, P.scale(c.terms, self._Pinv[s][a]))
                comps.append(acc)
            self._ch = PolyMap(self.chart_space, self.chart_space, comps)
        return self._ch

    def chart_inverse(self) -> PolyMap:
        if self._ch_inv is None:
            self._ch_inv = invert_ssr(self.chart_map())
        return self._ch_inv


def ch_chart(T: TransversalChart, v: Sequence, u: Sequence) -> SsrVectorField:
    """``log(exp(v) exp(u))``: apply ``v``'s flow first, then ``u``'s."""
    X = T.element(T.join(v, [0] * len(T.u_index)))
    Y = T.element(T.join([0] * len(T.v_index), u))
    return bch(X, Y)


def ch_inverse(T: TransversalChart, n: SsrVectorField) -> Tuple[List[Fraction], List[Fraction]]:
    coords = T.chart_inverse()(T.coordinates(n))
    return T.split(list(coords))


def coset_reduce(T: TransversalChart, n: SsrVectorField, method: str = "iterate") -> List[Fraction]:
    """The transversal part ``v`` with ``exp(n)`` in ``exp(v) U+``.

    ``method="iterate"`` solves ``ch(v, u) = n`` by the fixed point
    ``(v, u) <- (v, u) + (n - ch(v, u))``, which terminates because ``ch``
    is the identity plus nilpotent terms; ``method="chart"`` evaluates the
    symbolic inverse chart instead.
    """
    if method == "chart":
        return ch_inverse(T, n)[0]
    target = T.coordinates(n)
    ch = T.chart_map()
    x = list(target)
    bound = T.dim + nilpotency_bound(T.space) + 2
    for _ in range(bound):
        img = ch(x)
        r = [a - b for a, b in zip(target, img)]
        if not any(r):
            return T.split(x)[0]
        x = [a + b for a, b in zip(x, r)]
    raise DivergenceError("coset reduction did not terminate; subalgebra data is inconsistent")


def change_of_transversal(T1: TransversalChart, T2: TransversalChart) -> PolyMap:
    """``pi_{v1} o ch_{v1}^{-1} o ch_{v2}`` restricted to ``v2`` as a map ``v2 -> v1``."""
    if T1.subalgebra.space != T2.subalgebra.space:
        raise SpaceMismatch("charts on different spaces")
    # express T2 chart coordinates in T1 chart coordinates (a linear change)
    lin = [T1.coordinates(T2.element([Fraction(int(a == b)) for b in range(T2.dim)])) for a in range(T2.dim)]
    N2 = T2.dim
    # ch_{v2} restricted to v2 (u = 0) is the inclusion v2 -> n
    comps_n2 = [P.variable(a, N2, Fraction(1)) if T2.is_v[a] else {} for a in range(N2)]
    # convert to T1 coordinates: c1_b = sum_a c2_a lin[a][b]
    comps_n1 = []
    for b in range(T1.dim):
        acc = {}
        for a in range(N2):
            if lin[a][b] and comps_n2[a]:
                acc = P.add(acc, P.scale(comps_n2[a], lin[a][b]))
        comps_n1.append(acc)
    inv = T1.chart_inverse()
    pulled = [P.compose(c, comps_n1, N2) for c in inv.comps]
    v2_space = T2.chart_space.subspace(T2.v_index)
    v1_space = T1.chart_space.subspace(T1.v_index)
    keep = T2.v_index
    out = []
    for a in T1.v_index:
        d = {}
        for e, c in pulled[a].items():
            if any(e[k] for k in range(N2) if k not in keep):
                continue
            d[tuple(e[k] for k in keep)] = c
        out.append(d)
    return PolyMap(v2_space, v1_space, out)


# -- Haar measure ---------------------------------------------------------------

def haar_pushforward(U: Subalgebra, box: Sequence[Tuple[object, object]]) -> Fraction:
    """Haar volume of a box in exponential coordinates of ``U``.

    In exponential coordinates Haar measure is Lebesgue measure (left
    translation has Jacobian determinant 1, see :func:`translation_jacobian`),
    normalized so the unit box has volume 1.
    """
    if len(box) != U.dim:
        raise SpaceMismatch(f"box has {len(box)} sides, subalgebra has dimension {U.dim}")
    vol = Fraction(1)
    for a, b in box:
        a, b = Fraction(a), Fraction(b)
        if not b > a:
            raise ValueError("degenerate box: every side needs lower < upper")
        vol *= b - a
    return vol


def left_translation_map(U: Subalgebra, u0: Sequence) -> List[dict]:
    """Coordinates of ``u -> bch(u0, u)`` as polynomials in the basis coordinates of ``u``."""
    k = U.dim
    X0 = U.element(u0)
    one = P.Poly(P.constant(Fraction(1), k), k)
    t = [P.Poly.var(a, k) for a in range(k)]
    comps = [dict() for _ in range(U.space.dim)]
    for a, Xa in enumerate(U.basis):
        for i, comp in enumerate(Xa.comps):
            for m, c in comp.items():
                comps[i][m] = comps[i][m] + t[a] * c if m in comps[i] else t[a] * c
    X0c = [{m: one * c for m, c in comp.items()} for comp in X0.comps]
    B = enumerate_basis(U.space)
    Z = _bch_comps(X0c, comps, B, one)
    slots = lie_slots(U.space)
    A = [X.vector(slots) for X in U.basis]
    # read coordinates off k slots on which the basis is independent
    sub = [[A[r][s] for r in range(k)] for s in range(len(slots))]
    chosen: List[int] = []
    for s in range(len(slots)):
        if exact.rank([sub[x] for x in chosen + [s]]) > len(chosen):
            chosen.append(s)
        if len(chosen) == k:
            break
    Msq = [sub[s] for s in chosen]  # Msq[s][a] = A[a][s]
    Minv = exact.inverse(Msq)
    zvec = []
    for s in chosen:
        i, m = slots[s]
        zvec.append(Z[i].get(m))
    out = []
    for a in range(k):
        acc: dict = {}
        for j, z in enumerate(zvec):
            if z is not None and Minv[a][j]:
                acc = P.add(acc, P.scale(z.terms, Minv[a][j]))
        out.append(acc)
    return out


def translation_jacobian(U: Subalgebra, u0: Sequence, at: Sequence) -> Fraction:
    """Exact Jacobian determinant of ``u -> bch(u0, u)`` at the point ``at``."""
    comps = left_translation_map(U, u0)
    k = U.dim
    J = [[Fraction(P.evaluate(P.derivative(c, b), [Fraction(x) for x in at])) if c else Fraction(0)
          for b in range(k)] for c in comps]
    return exact.det(J)


def haar_translation_mc(U: Subalgebra, box, u0, samples: int = 100_000, seed: int = 0) -> dict:
    """Monte-Carlo estimate of the Haar volume of ``exp(u0) . box`` (diagnostic only)."""
    k = U.dim
    fwd = left_translation_map(U, u0)
    inv = left_translation_map(U, [-Fraction(x) for x in u0])
    lo = np.array([float(a) for a, _ in box])
    hi = np.array([float(b) for _, b in box])
    rng = SplitMix64(seed)
    # bounding box of the image from corner and random probes
    probes = np.array([[rng.uniform(lo[j], hi[j]) for j in range(k)] for _ in range(256)])
    corners = np.array([[lo[j] if (c >> j) & 1 else hi[j] for j in range(k)] for c in range(2 ** k)])
    pts = np.vstack([probes, corners])
    img = np.array([[float(P.evaluate(c, list(p))) if c else 0.0 for c in fwd] for p in pts])
    span = img.max(axis=0) - img.min(axis=0)
    blo = img.min(axis=0) - 0.25 * span - 1e-9
    bhi = img.max(axis=0) + 0.25 * span + 1e-9
    draws = np.array([[rng.uniform(blo[j], bhi[j]) for j in range(k)] for _ in range(samples)])
    back = np.array([[float(P.evaluate(c, list(p))) if c else 0.0 for c in inv] for p in draws])
    inside = np.all((back >= lo) & (back <= hi), axis=1)
    frac = inside.mean()
    vol = float(np.prod(bhi - blo))
    est = vol * frac
    se = vol * math.sqrt(max(frac * (1 - frac), 1e-300) / samples)
    return {"estimate": est, "stderr": se, "exact": float(haar_pushforward(U, box))}


# -- random generation -----------------------------------------------------------

def random_field(space: WeightedSpace, rng: SplitMix64, density: float = 0.5, strict: bool = True) -> SsrVectorField:
    coeffs = {}
    for s in lie_slots(space, strict):
        if rng.bernoulli(density):
            coeffs[s] = rng.rational(3, 3, nonzero=True)
    return SsrVectorField.from_slots(space, coeffs)
