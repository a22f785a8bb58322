"""Exact algebra of subresonant polynomial maps between weighted spaces.

Conventions
-----------
A :class:`WeightedSpace` lists coordinate *functions* with positive weights
``lambda_1 >= lambda_2 >= ... > 0``; the vector direction dual to the i-th
coordinate has weight ``-lambda_i``.  A monomial ``x^e`` has weight
``sum(e_i * lambda_i)``.  A polynomial map ``F: V -> W`` is subresonant when
every monomial in its i-th component has weight ``<= lambda_i(W)``.

Monomials inside a component are ordered by ``(weight, exponent tuple)``,
ascending.  All coefficients are ``Fraction``.
"""
from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from . import exact
from . import polynomial as P
from .errors import ClassViolation, SpaceMismatch
from .rng import SplitMix64

Exps = Tuple[int, ...]
Monomial = Exps


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # floats are accepted only when they are exact binary fractions of
        # something sensible; callers should pass strings for e.g. 0.1
        return Fraction(x)
    return Fraction(x)


def _default_names(n: int) -> Tuple[str, ...]:
    if n <= 3:
        return tuple("xyz"[:n])
    return tuple(f"x{i + 1}" for i in range(n))


@dataclass(frozen=True)
class WeightedSpace:
    """Coordinates with strictly positive, non-increasing rational weights."""

    coords: Tuple[str, ...]
    weights: Tuple[Fraction, ...]

    def __post_init__(self):
        coords = tuple(str(c) for c in self.coords)
        weights = tuple(_frac(w) for w in self.weights)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "weights", weights)
        if len(coords) != len(weights):
            raise ValueError("coords and weights must have equal length")
        if not coords:
            raise ValueError("a weighted space needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ValueError("coordinate names must be distinct")
        for c in coords:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", c):
                raise ValueError(f"bad coordinate name {c!r}")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be strictly positive")
        if any(a < b for a, b in zip(weights, weights[1:])):
            raise ValueError("weights must be sorted non-increasing")

    @classmethod
    def from_weights(cls, weights: Sequence, coords: Optional[Sequence[str]] = None) -> "WeightedSpace":
        weights = tuple(_frac(w) for w in weights)
        if coords is None:
            coords = _default_names(len(weights))
        return cls(tuple(coords), weights)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def top_weight(self) -> Fraction:
        return self.weights[0]

    def distinct_weights(self) -> Tuple[Fraction, ...]:
        return tuple(sorted(set(self.weights), reverse=True))

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def monomial_weight(self, exps: Sequence[int]) -> Fraction:
        return monomial_weight(exps, self)

    def subspace(self, keep: Sequence[int]) -> "WeightedSpace":
        return WeightedSpace(tuple(self.coords[i] for i in keep), tuple(self.weights[i] for i in keep))

    def to_json(self) -> dict:
        return {"coords": list(self.coords), "weights": [str(w) for w in self.weights]}

    @classmethod
    def from_json(cls, d: dict) -> "WeightedSpace":
        return cls(tuple(d["coords"]), tuple(_frac(w) for w in d["weights"]))


def monomial_weight(exps: Sequence[int], space: WeightedSpace) -> Fraction:
    if len(exps) != space.dim:
        raise SpaceMismatch(f"monomial has {len(exps)} exponents, space has dimension {space.dim}")
    return sum((e * w for e, w in zip(exps, space.weights)), Fraction(0))


@functools.lru_cache(maxsize=None)
def _monomials_below(weights: Tuple[Fraction, ...], budget: Fraction, strict: bool) -> Tuple[Exps, ...]:
    n = len(weights)
    found: List[Exps] = []

    def rec(i: int, prefix: List[int], used: Fraction):
        if i == n:
            found.append(tuple(prefix))
            return
        k = 0
        while True:
            w = used + k * weights[i]
            if w > budget or (strict and w >= budget and i == n - 1 and False):
                break
            prefix.append(k)
            rec(i + 1, prefix, w)
            prefix.pop()
            k += 1

    rec(0, [], Fraction(0))

    def wt(e):
        return sum((a * b for a, b in zip(e, weights)), Fraction(0))

    if strict:
        found = [e for e in found if wt(e) < budget]
    found.sort(key=lambda e: (wt(e), e))
    return tuple(found)


def monomials_up_to(space: WeightedSpace, budget, strict: bool = False) -> Tuple[Exps, ...]:
    """All monomials of weight ``<= budget`` (``< budget`` if strict), sorted by (weight, lex)."""
    return _monomials_below(space.weights, _frac(budget), strict)


class MapClass(enum.Flag):
    NONE = 0
    SUBRESONANT = enum.auto()
    RESONANT = enum.auto()
    STRICTLY_SUBRESONANT = enum.auto()


def _sort_key(space: WeightedSpace):
    def key(e):
        return (monomial_weight(e, space), e)

    return key


class PolyMap:
    """Polynomial map between weighted spaces with exact rational coefficients.

    ``comps[i]`` is a dict ``exps -> Fraction`` for the i-th target
    coordinate; zero coefficients are never stored.  Instances are treated
    as immutable.
    """

    __slots__ = ("source", "target", "comps")

    def __init__(self, source: WeightedSpace, target: WeightedSpace, comps: Sequence[Dict[Exps, object]]):
        if len(comps) != target.dim:
            raise SpaceMismatch(f"expected {target.dim} components, got {len(comps)}")
        clean = []
        for comp in comps:
            d = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != source.dim or any(k < 0 for k in e):
                    raise SpaceMismatch(f"bad exponent vector {e} for source of dimension {source.dim}")
                c = _frac(c)
                if c:
                    d[e] = d.get(e, Fraction(0)) + c
                    if not d[e]:
                        del d[e]
            clean.append(d)
        self.source = source
        self.target = target
        self.comps = tuple(clean)

    # -- constructors -----------------------------------------------------

    @classmethod
    def identity(cls, space: WeightedSpace) -> "PolyMap":
        n = space.dim
        return cls(space, space, [P.variable(i, n, Fraction(1)) for i in range(n)])

    @classmethod
    def translation(cls, space: WeightedSpace, vector: Sequence) -> "PolyMap":
        n = space.dim
        if len(vector) != n:
            raise SpaceMismatch("translation vector has wrong length")
        comps = []
        for i in range(n):
            d = P.variable(i, n, Fraction(1))
            c = _frac(vector[i])
            if c:
                d[P.zero_exps(n)] = c
            comps.append(d)
        return cls(space, space, comps)

    @classmethod
    def linear(cls, source: WeightedSpace, target: WeightedSpace, matrix) -> "PolyMap":
        n = source.dim
        comps = []
        for row in matrix:
            comps.append({P.unit_exps(j, n): _frac(a) for j, a in enumerate(row) if a})
        return cls(source, target, comps)

    @classmethod
    def zero(cls, source: WeightedSpace, target: WeightedSpace) -> "PolyMap":
        return cls(source, target, [{} for _ in range(target.dim)])

    # -- basic protocol ---------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, PolyMap):
            return NotImplemented
        return self.source == other.source and self.target == other.target and self.comps == other.comps

    def __hash__(self):
        return hash((self.source, self.target, tuple(frozenset(c.items()) for c in self.comps)))

    def __repr__(self):
        return f"PolyMap({self.to_text()!r})"

    def __call__(self, point: Sequence):
        if len(point) != self.source.dim:
            raise SpaceMismatch("point has wrong dimension")
        return tuple(P.evaluate(c, point) if c else 0 * point[0] for c in self.comps)

    def __add__(self, other: "PolyMap") -> "PolyMap":
        self._same_spaces(other)
        return PolyMap(self.source, self.target, [P.add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        self._same_spaces(other)
        return PolyMap(self.source, self.target, [P.sub(a, b) for a, b in zip(self.comps, other.comps)])

    def scaled(self, c) -> "PolyMap":
        return PolyMap(self.source, self.target, [P.scale(a, _frac(c)) for a in self.comps])

    def _same_spaces(self, other: "PolyMap"):
        if self.source != other.source or self.target != other.target:
            raise SpaceMismatch("maps act between different spaces")

    def terms(self) -> Iterator[Tuple[int, Exps, Fraction]]:
        """Yield ``(component, exps, coeff)`` in canonical order."""
        key = _sort_key(self.source)
        for i, comp in enumerate(self.comps):
            for e in sorted(comp, key=key):
                yield i, e, comp[e]

    def degree(self) -> int:
        return max((P.degree(c) for c in self.comps), default=-1)

    def term_weights(self) -> Iterator[Tuple[int, Exps, Fraction]]:
        """Yield ``(component, exps, weight(m) - lambda_component)``."""
        for i, e, _ in self.terms():
            yield i, e, monomial_weight(e, self.source) - self.target.weights[i]

    def linear_part(self) -> List[List[Fraction]]:
        """Matrix of first-order coefficients at the origin."""
        n = self.source.dim
        return [[comp.get(P.unit_exps(j, n), Fraction(0)) for j in range(n)] for comp in self.comps]

    def constant_part(self) -> Tuple[Fraction, ...]:
        z = P.zero_exps(self.source.dim)
        return tuple(comp.get(z, Fraction(0)) for comp in self.comps)

    def is_identity(self) -> bool:
        return self.source == self.target and self == PolyMap.identity(self.source)

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        return format_text(self)

    @classmethod
    def from_text(cls, text: str, source: WeightedSpace, target: Optional[WeightedSpace] = None) -> "PolyMap":
        return parse_text(text, source, target)

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "terms": [
                {"component": i, "exps": list(e), "num": c.numerator, "den": c.denominator}
                for i, e, c in self.terms()
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PolyMap":
        source = WeightedSpace.from_json(d["source"])
        target = WeightedSpace.from_json(d["target"])
        comps: List[Dict[Exps, Fraction]] = [{} for _ in range(target.dim)]
        for t in d["terms"]:
            i = int(t["component"])
            if not 0 <= i < target.dim:
                raise SpaceMismatch(f"component index {i} out of range")
            e = tuple(int(k) for k in t["exps"])
            if e in comps[i]:
                raise ValueError(f"duplicate term {e} in component {i}")
            comps[i][e] = Fraction(int(t["num"]), int(t["den"]))
        return cls(source, target, comps)


# -- text form -------------------------------------------------------------

def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _fmt_monomial(e: Exps, names: Sequence[str]) -> str:
    parts = []
    for name, k in zip(names, e):
        if k == 1:
            parts.append(name)
        elif k > 1:
            parts.append(f"{name}^{k}")
    return " * ".join(parts)


def format_text(F: PolyMap) -> str:
    """Canonical text: ``x <- 2 * x + 3/2 * y^2 ; y <- 5 * y``."""
    pieces = []
    key = _sort_key(F.source)
    for name, comp in zip(F.target.coords, F.comps):
        if not comp:
            pieces.append(f"{name} <- 0")
            continue
        terms = []
        for e in sorted(comp, key=key):
            mono = _fmt_monomial(e, F.source.coords)
            coeff = _fmt_coeff(comp[e])
            terms.append(f"{coeff} * {mono}" if mono else coeff)
        pieces.append(f"{name} <- " + " + ".join(terms))
    return " ; ".join(pieces)


_NUM = re.compile(r"^[+-]?\d+(/\d+)?$|^[+-]?\d*\.\d+$")


def _parse_term(term: str, source: WeightedSpace) -> Tuple[Exps, Fraction]:
    coeff = Fraction(1)
    exps = [0] * source.dim
    term = term.strip()
    if term.startswith("-"):
        coeff = -coeff
        term = term[1:].strip()
    elif term.startswith("+"):
        term = term[1:].strip()
    if not term:
        raise ValueError("empty term")
    for factor in term.split("*"):
        factor = factor.strip()
        if not factor:
            raise ValueError(f"empty factor in term {term!r}")
        if _NUM.match(factor):
            coeff *= Fraction(factor)
            continue
        if "^" in factor:
            name, _, k = factor.partition("^")
            name, k = name.strip(), k.strip()
            if not k.isdigit():
                raise ValueError(f"bad exponent in {factor!r}")
            k = int(k)
        else:
            name, k = factor, 1
        if name not in source.coords:
            raise ValueError(f"unknown coordinate {name!r}")
        exps[source.index(name)] += k
    return tuple(exps), coeff


def parse_text(text: str, source: WeightedSpace, target: Optional[WeightedSpace] = None) -> PolyMap:
    """Parse the text form; components may appear in any order, missing ones are 0."""
    target = source if target is None else target
    comps: List[Dict[Exps, Fraction]] = [{} for _ in range(target.dim)]
    seen = set()
    for piece in text.split(";"):
        piece = piece.strip()
        if not piece:
            continue
        if "<-" not in piece:
            raise ValueError(f"component {piece!r} lacks '<-'")
        name, _, rhs = piece.partition("<-")
        name = name.strip()
        if name not in target.coords:
            raise ValueError(f"unknown target coordinate {name!r}")
        if name in seen:
            raise ValueError(f"component {name!r} given twice")
        seen.add(name)
        i = target.index(name)
        rhs = re.sub(r"(?<=[^\s*^/+-])\s*-\s*", " + -", rhs.strip())
        rhs = re.sub(r"\s+-\s+", " + -", rhs)
        if rhs.strip() == "0":
            continue
        for term in rhs.split("+"):
            if not term.strip():
                continue
            e, c = _parse_term(term, source)
            comps[i][e] = comps[i].get(e, Fraction(0)) + c
    return PolyMap(source, target, comps)


# -- classification ---------------------------------------------------------

def classify(F: PolyMap) -> MapClass:
    """Classes the map belongs to (a flag set; ``MapClass.NONE`` if not subresonant)."""
    result = MapClass.NONE
    sub = True
    res = True
    for i, e, c in F.terms():
        d = monomial_weight(e, F.source) - F.target.weights[i]
        if d > 0:
            sub = False
            res = False
            break
        if d != 0:
            res = False
    if not sub:
        return MapClass.NONE
    result |= MapClass.SUBRESONANT
    if res:
        result |= MapClass.RESONANT
    if F.source == F.target:
        H = F - PolyMap.identity(F.source)
        if all(monomial_weight(e, F.source) < F.target.weights[i] for i, e, _ in H.terms()):
            result |= MapClass.STRICTLY_SUBRESONANT
    return result


def is_subresonant(F: PolyMap) -> bool:
    return MapClass.SUBRESONANT in classify(F)


def is_unipotent(F: PolyMap) -> bool:
    """Subresonant, same space, and the linear part is the identity on each graded block.

    Equivalently ``F - id`` only has terms of negative weight or resonant
    terms built from lower-weight coordinates; these maps form the
    unipotent radical of the invertible subresonant maps.
    """
    if F.source != F.target or not is_subresonant(F):
        return False
    n = F.source.dim
    w = F.source.weights
    for i, comp in enumerate(F.comps):
        for j in range(n):
            if w[j] == w[i]:
                if comp.get(P.unit_exps(j, n), Fraction(0)) != (1 if i == j else 0):
                    return False
    return True


def _require_subresonant(F: PolyMap, what: str):
    if not is_subresonant(F):
        raise ClassViolation(f"{what} is not subresonant: {F.to_text()}")


# -- operations -------------------------------------------------------------

def compose_unchecked(F: PolyMap, G: PolyMap) -> PolyMap:
    if G.target != F.source:
        raise SpaceMismatch("target of G differs from source of F")
    n = G.source.dim
    cache: dict = {}
    comps = [P.compose(c, G.comps, n, cache=cache) for c in F.comps]
    return PolyMap(G.source, F.target, comps)


def compose(F: PolyMap, G: PolyMap) -> PolyMap:
    """``F o G`` for subresonant ``F`` and ``G``; the result is checked to be subresonant."""
    if G.target != F.source:
        raise SpaceMismatch("target of G differs from source of F")
    _require_subresonant(F, "F")
    _require_subresonant(G, "G")
    out = compose_unchecked(F, G)
    if not is_subresonant(out):
        raise ClassViolation("composition escaped the weight budget")
    return out


def invert_ssr(F: PolyMap) -> PolyMap:
    """Inverse of a unipotent subresonant map by the nilpotent fixed point ``G = id - (F - id) o G``."""
    if not is_unipotent(F):
        raise ClassViolation(f"map is not strictly subresonant (unipotent): {F.to_text()}")
    V = F.source
    ident = PolyMap.identity(V)
    H = F - ident
    G = ident
    bound = V.dim * max(F.degree(), 1) + 2
    for _ in range(bound):
        G_next = ident - compose_unchecked(H, G)
        if G_next == G:
            return G
        G = G_next
    raise ArithmeticError("nilpotent inversion did not terminate")


def _block_linear(F: PolyMap) -> List[List[Fraction]]:
    """Block-diagonal (weight-preserving) part of the linear part of F."""
    L = F.linear_part()
    w = F.source.weights
    return [[L[i][j] if w[i] == w[j] else Fraction(0) for j in range(len(w))] for i in range(len(w))]


def invert(F: PolyMap) -> PolyMap:
    """Inverse of an invertible subresonant map ``V -> V``.

    Splits off the weight-preserving linear part ``D`` and inverts the
    unipotent remainder ``D^-1 o F`` by :func:`invert_ssr`.
    """
    if F.source != F.target:
        raise SpaceMismatch("only self-maps can be inverted")
    _require_subresonant(F, "F")
    V = F.source
    D = _block_linear(F)
    try:
        Dinv = exact.inverse(D)
    except ZeroDivisionError:
        raise ClassViolation("differential at the origin is singular") from None
    Dinv_map = PolyMap.linear(V, V, Dinv)
    K = compose_unchecked(Dinv_map, F)
    return compose_unchecked(invert_ssr(K), Dinv_map)


def differential_at(F: PolyMap, point: Sequence) -> List[List[Fraction]]:
    if len(point) != F.source.dim:
        raise SpaceMismatch("point has wrong dimension")
    _require_subresonant(F, "F")
    pt = [_frac(p) for p in point]
    rows = []
    for comp in F.comps:
        rows.append([Fraction(P.evaluate(P.derivative(comp, j), pt)) if comp else Fraction(0)
                     for j in range(F.source.dim)])
    return rows


def quotient_map(F: PolyMap, lam) -> PolyMap:
    """Induced map on ``V / V^{<= -lam} -> W / W^{<= -lam}``.

    Coordinates of weight ``>= lam`` are quotiented out.
    """
    lam = _frac(lam)
    if lam not in F.source.weights and lam not in F.target.weights:
        raise ValueError(f"{lam} is not a filtration weight")
    _require_subresonant(F, "F")
    keep_src = [i for i, w in enumerate(F.source.weights) if w < lam]
    keep_tgt = [i for i, w in enumerate(F.target.weights) if w < lam]
    if not keep_src or not keep_tgt:
        raise ValueError("quotient would be the zero space")
    src = F.source.subspace(keep_src)
    tgt = F.target.subspace(keep_tgt)
    killed = [i for i in range(F.source.dim) if i not in keep_src]
    comps = []
    for i in keep_tgt:
        d = {}
        for e, c in F.comps[i].items():
            if any(e[k] for k in killed):
                continue
            d[tuple(e[k] for k in keep_src)] = c
        comps.append(d)
    return PolyMap(src, tgt, comps)


def weight_zero_part(F: PolyMap) -> PolyMap:
    comps = []
    for i, comp in enumerate(F.comps):
        lam = F.target.weights[i]
        comps.append({e: c for e, c in comp.items() if monomial_weight(e, F.source) == lam})
    return PolyMap(F.source, F.target, comps)


def sr_decompose(F: PolyMap) -> Tuple[PolyMap, PolyMap]:
    """Split ``F = S o R`` with ``R`` resonant and ``S`` strictly subresonant.

    ``R`` is the weight-zero part of ``F`` (the image under the projection
    homomorphism onto resonant maps) and ``S = F o R^-1``.
    """
    if F.source != F.target:
        raise SpaceMismatch("decomposition is defined for self-maps")
    _require_subresonant(F, "F")
    R = weight_zero_part(F)
    try:
        Rinv = invert(R)
    except ClassViolation as exc:
        raise ClassViolation("singular differential at the origin") from exc
    S = compose_unchecked(F, Rinv)
    if MapClass.STRICTLY_SUBRESONANT not in classify(S):
        raise ArithmeticError("strictly subresonant factor failed its class check")
    return R, S


# -- random generation (property batteries) ----------------------------------

def _random_block(rng: SplitMix64, k: int, unipotent: bool) -> List[List[Fraction]]:
    while True:
        if unipotent:
            m = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
            return m
        m = [[rng.rational(3, 2) for _ in range(k)] for _ in range(k)]
        if exact.det(m):
            return m


def random_subresonant(
    space: WeightedSpace,
    rng: SplitMix64,
    density: float = 0.5,
    invertible: bool = True,
    target: Optional[WeightedSpace] = None,
) -> PolyMap:
    """Random subresonant map; with ``invertible`` the graded linear blocks are nonsingular."""
    target = space if target is None else target
    n = space.dim
    comps: List[Dict[Exps, Fraction]] = [{} for _ in range(target.dim)]
    same = target == space
    if same and invertible:
        for w in space.distinct_weights():
            idx = [i for i in range(n) if space.weights[i] == w]
            B = _random_block(rng, len(idx), unipotent=False)
            for a, i in enumerate(idx):
                for b, j in enumerate(idx):
                    if B[a][b]:
                        comps[i][P.unit_exps(j, n)] = B[a][b]
    for i in range(target.dim):
        for e in monomials_up_to(space, target.weights[i]):
            if same and invertible and sum(e) == 1 and space.weights[e.index(1)] == target.weights[i]:
                continue
            if rng.bernoulli(density):
                comps[i][e] = rng.rational(3, 3, nonzero=True)
    return PolyMap(space, target, comps)


def random_ssr(space: WeightedSpace, rng: SplitMix64, density: float = 0.5) -> PolyMap:
    """Random element of ``id + Poly(V, V)^{<0}``."""
    n = space.dim
    comps = []
    for i in range(n):
        d = {P.unit_exps(i, n): Fraction(1)}
        for e in monomials_up_to(space, space.weights[i], strict=True):
            if rng.bernoulli(density):
                d[e] = d.get(e, Fraction(0)) + rng.rational(3, 3, nonzero=True)
        comps.append(d)
    return PolyMap(space, space, comps)


def random_unipotent(space: WeightedSpace, rng: SplitMix64, density: float = 0.5) -> PolyMap:
    """Random unipotent subresonant map (strict terms plus nilpotent resonant terms)."""
    n = space.dim
    comps = []
    for i in range(n):
        d = {P.unit_exps(i, n): Fraction(1)}
        for e in monomials_up_to(space, space.weights[i]):
            if sum(e) == 1 and space.weights[e.index(1)] == space.weights[i]:
                continue
            if rng.bernoulli(density):
                d[e] = d.get(e, Fraction(0)) + rng.rational(3, 3, nonzero=True)
        comps.append(d)
    return PolyMap(space, space, comps)


def random_point(space: WeightedSpace, rng: SplitMix64, num_bound: int = 5, den_bound: int = 4) -> Tuple[Fraction, ...]:
    return tuple(rng.rational(num_bound, den_bound) for _ in range(space.dim))
