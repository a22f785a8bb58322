"""Jets, the ``A = PA + R`` split, normal-form conjugacies and graded holonomies.

A :class:`Jet` is a truncated polynomial self-map fixing 0, with one weight
per coordinate (weights need not be sorted here).  The term ``c x^e`` in
component ``i`` is *subresonant* if ``sum e_j w_j <= w_i`` and
*super-resonant* otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exact
from . import polynomial as P
from .errors import ClassViolation, DivergenceError, NumericalFailure, SmallDivisor
from .sralg import PolyMap, WeightedSpace

Exps = Tuple[int, ...]


def _as_weight(w) -> Fraction:
    if isinstance(w, float):
        raise ValueError(f"weight {w!r} is a float; snap exponents to a rational profile first")
    return Fraction(w)


@dataclass(frozen=True)
class Jet:
    comps: Tuple[Dict[Exps, object], ...]
    degree: int
    weights: Optional[Tuple[Fraction, ...]] = None
    mode: str = "rational"

    def __post_init__(self):
        n = len(self.comps)
        clean = []
        for comp in self.comps:
            d = {}
            for e, c in comp.items():
                e = tuple(int(k) for k in e)
                if len(e) != n:
                    raise ValueError("exponent length differs from jet dimension")
                if sum(e) == 0:
                    raise ValueError("jets are based at a fixed point: no constant terms")
                if sum(e) > self.degree:
                    continue
                c = Fraction(c) if self.mode == "rational" else float(c)
                if c:
                    d[e] = c
            clean.append(d)
        object.__setattr__(self, "comps", tuple(clean))
        if self.weights is not None:
            if len(self.weights) != n:
                raise ValueError("one weight per coordinate")
            object.__setattr__(self, "weights", tuple(_as_weight(w) for w in self.weights))
        if self.mode not in ("rational", "float"):
            raise ValueError("mode must be 'rational' or 'float'")

    @property
    def dim(self) -> int:
        return len(self.comps)

    @classmethod
    def identity(cls, n: int, degree: int, weights=None, mode="rational") -> "Jet":
        one = Fraction(1) if mode == "rational" else 1.0
        return cls(tuple(P.variable(i, n, one) for i in range(n)), degree, weights, mode)

    @classmethod
    def from_polymap(cls, F: PolyMap, degree: int, weights=None) -> "Jet":
        return cls(F.comps, degree, weights if weights is not None else F.source.weights)

    def with_comps(self, comps) -> "Jet":
        return Jet(tuple(comps), self.degree, self.weights, self.mode)

    def linear_part(self):
        n = self.dim
        z = Fraction(0) if self.mode == "rational" else 0.0
        return [[c.get(P.unit_exps(j, n), z) for j in range(n)] for c in self.comps]

    def to_float(self) -> "Jet":
        return Jet(tuple({e: float(c) for e, c in comp.items()} for comp in self.comps), self.degree, self.weights, "float")

    def __sub__(self, other: "Jet") -> List[dict]:
        return [P.sub(a, b) for a, b in zip(self.comps, other.comps)]

    def max_coeff(self) -> float:
        return max((abs(float(c)) for comp in self.comps for c in comp.values()), default=0.0)

    def to_text(self, names: Optional[Sequence[str]] = None) -> str:
        names = names or (tuple("xyz"[: self.dim]) if self.dim <= 3 else tuple(f"x{i + 1}" for i in range(self.dim)))
        pieces = []
        for name, comp in zip(names, self.comps):
            if not comp:
                pieces.append(f"{name} <- 0")
                continue
            terms = []
            for e in sorted(comp, key=lambda e: (sum(e), tuple(-k for k in e))):
                mono = " * ".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
                c = comp[e]
                cs = (str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}") \
                    if isinstance(c, Fraction) else repr(c)
                terms.append(f"{cs} * {mono}")
            pieces.append(f"{name} <- " + " + ".join(terms))
        return " ; ".join(pieces)

    def to_json(self) -> List[List[dict]]:
        out = []
        for comp in self.comps:
            terms = []
            for e in sorted(comp):
                c = comp[e]
                if isinstance(c, Fraction):
                    terms.append({"exps": list(e), "num": c.numerator, "den": c.denominator})
                else:
                    terms.append({"exps": list(e), "value": float(c)})
            out.append(terms)
        return out


def _check_pair(F: Jet, G: Jet):
    if F.dim != G.dim:
        raise ValueError("jets of different dimension")


def jet_compose(F: Jet, G: Jet) -> Jet:
    """``F o G`` truncated at ``min(deg F, deg G)``."""
    _check_pair(F, G)
    D = min(F.degree, G.degree)
    cache: dict = {}
    comps = [P.compose(c, G.comps, G.dim, max_degree=D, cache=cache) for c in F.comps]
    mode = "float" if "float" in (F.mode, G.mode) else "rational"
    return Jet(tuple(comps), D, F.weights or G.weights, mode)


def jet_invert(F: Jet) -> Jet:
    """Inverse jet by the fixed point ``G = L^{-1}(id - N o G)``, ``F = L + N``."""
    n, D = F.dim, F.degree
    L = F.linear_part()
    if F.mode == "rational":
        try:
            Linv = exact.inverse(L)
        except ZeroDivisionError:
            raise NumericalFailure("singular linear part") from None
    else:
        La = np.array(L, dtype=float)
        if abs(np.linalg.det(La)) < 1e-300 or np.linalg.cond(La) > 1e14:
            raise NumericalFailure("singular linear part")
        Linv = np.linalg.inv(La).tolist()
    Nl = [{e: c for e, c in comp.items() if sum(e) >= 2} for comp in F.comps]
    lin_inv = [{P.unit_exps(j, n): Linv[i][j] for j in range(n) if Linv[i][j]} for i in range(n)]
    G = lin_inv
    for _ in range(D):
        cache: dict = {}
        NG = [P.compose(c, G, n, max_degree=D, cache=cache) for c in Nl]
        # G = Linv (x - N(G))
        rhs = [P.sub(P.variable(i, n, 1 if F.mode == "float" else Fraction(1)), NG[i]) for i in range(n)]
        G = [P.compose(c, rhs, n, max_degree=D) if c else {} for c in lin_inv]
    return Jet(tuple(G), D, F.weights, F.mode)


def term_excess(e: Exps, i: int, weights: Sequence[Fraction]) -> Fraction:
    return sum((k * w for k, w in zip(e, weights)), Fraction(0)) - weights[i]


def sr_split(A: Jet, weights: Optional[Sequence] = None) -> Tuple[Jet, Jet]:
    """``A = PA + R`` with ``PA`` the terms of weight ``<= w_i`` in component ``i``."""
    weights = A.weights if weights is None else tuple(_as_weight(w) for w in weights)
    if weights is None:
        raise ValueError("sr_split needs a weight profile")
    pa, r = [], []
    for i, comp in enumerate(A.comps):
        keep, rest = {}, {}
        for e, c in comp.items():
            (keep if term_excess(e, i, weights) <= 0 else rest)[e] = c
        pa.append(keep)
        r.append(rest)
    return Jet(tuple(pa), A.degree, weights, A.mode), Jet(tuple(r), A.degree, weights, A.mode)


def jet_to_polymap(J: Jet) -> Tuple[PolyMap, List[int]]:
    """Re-express a rational jet as a :class:`PolyMap` with coordinates sorted by weight.

    Returns the map and the permutation ``perm`` with new coordinate ``k`` =
    old coordinate ``perm[k]``.
    """
    if J.weights is None:
        raise ValueError("jet has no weights")
    if J.mode != "rational":
        raise ValueError("only rational jets transfer to PolyMap")
    n = J.dim
    perm = sorted(range(n), key=lambda i: (-J.weights[i], i))
    names = tuple(f"x{i + 1}" for i in range(n))
    space = WeightedSpace(tuple(names[i] for i in perm), tuple(J.weights[i] for i in perm))
    comps = []
    for i in perm:
        comps.append({tuple(e[j] for j in perm): c for e, c in J.comps[i].items()})
    return PolyMap(space, space, comps), perm


def resonance_degree(weights: Sequence, margin: float = 1.0, mu_spread: Optional[float] = None) -> int:
    """Smallest ``D`` with ``D * w_min > spread + margin`` (``spread`` defaults to ``w_max - w_min``)."""
    w = [float(_as_weight(x)) for x in weights]
    spread = max(w) - min(w) if mu_spread is None else mu_spread
    D = 1
    while not D * min(w) > spread + margin:
        D += 1
    return max(D, 2)


# -- normal forms ---------------------------------------------------------------------

@dataclass
class ConjugacyResult:
    weights: Tuple[Fraction, ...]
    degree: int
    N: Jet
    PA: Jet
    deviations: List[float] = field(default_factory=list)
    rate: float = 0.0
    verdict: str = "converged"
    iterations: int = 0
    history: List[Jet] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "weights": [str(w) for w in self.weights],
            "degree": self.degree,
            "N": self.N.to_json(),
            "N_text": self.N.to_text(),
            "PA": self.PA.to_json(),
            "PA_text": self.PA.to_text(),
            "deviations": [float(d) for d in self.deviations],
            "rate": float(self.rate),
            "verdict": self.verdict,
            "iterations": self.iterations,
        }


def _diagonal(L, mode) -> List:
    n = len(L)
    for i in range(n):
        for j in range(n):
            if i != j and L[i][j]:
                raise NumericalFailure("linear part is not diagonal; diagonalize first")
    return [L[i][i] for i in range(n)]


def normal_form_fixed_point(A: Jet, weights: Optional[Sequence] = None, degree: Optional[int] = None,
                            tol: float = 1e-9) -> ConjugacyResult:
    """Conjugacy ``N`` (``N(0) = 0``, ``DN(0) = id``) with ``N^{-1} A N`` subresonant.

    Degree by degree, each super-resonant coefficient ``a`` in slot
    ``(i, e)`` is killed by ``nu = -a / (s_i - s^e)``, ``s`` the diagonal of
    the linear part; subresonant slots are left untouched (canonical
    choice).  The conjugations compose as ``N = N_2 o N_3 o ... o N_D``.
    """
    weights = A.weights if weights is None else tuple(_as_weight(w) for w in weights)
    if weights is None:
        raise ValueError("normal form needs a weight profile")
    D = A.degree if degree is None else int(degree)
    A = Jet(A.comps, D, weights, A.mode)
    n = A.dim
    s = _diagonal(A.linear_part(), A.mode)
    if any(abs(float(x)) >= 1 or x == 0 for x in s):
        raise NumericalFailure("fixed point must be contracting with invertible linear part")
    N = Jet.identity(n, D, weights, A.mode)
    cur = A
    steps = 0
    for m in range(2, D + 1):
        nu = [dict() for _ in range(n)]
        for i, comp in enumerate(cur.comps):
            for e, a in comp.items():
                if sum(e) != m or term_excess(e, i, weights) <= 0:
                    continue
                se = 1
                for x, k in zip(s, e):
                    se = se * x**k
                d = s[i] - se
                scale = max(abs(float(s[i])), abs(float(se)))
                if d == 0 or (A.mode == "float" and abs(d) < tol * scale):
                    raise SmallDivisor(f"small divisor {d} in slot {(i, e)}", slot=(i, e), divisor=d)
                nu[i][e] = -a / d
        if not any(nu):
            continue
        steps += 1
        one = Fraction(1) if A.mode == "rational" else 1.0
        Nm = Jet(tuple(P.add(P.variable(i, n, one), nu[i]) for i in range(n)), D, weights, A.mode)
        cur = jet_compose(jet_invert(Nm), jet_compose(cur, Nm))
        N = jet_compose(N, Nm)
    PA, R = sr_split(cur, weights)
    if A.mode == "rational" and any(R.comps):
        raise ArithmeticError("super-resonant terms survived the exact solve")
    if A.mode == "float" and R.max_coeff() > tol:
        raise NumericalFailure("super-resonant residue above tolerance")
    return ConjugacyResult(tuple(weights), D, N, PA, [], 0.0, "converged", steps)


def fit_rate(devs: Sequence[float], floor: float = 0.0, tail: bool = True) -> float:
    """Geometric ratio from a least-squares fit of ``log dev``.

    Only values above ``floor`` (a round-off level) enter; with ``tail`` the
    fit uses the second half of those.
    """
    d = np.asarray(devs, dtype=float)
    d = d[: np.nonzero(d > floor)[0].max() + 1] if np.any(d > floor) else d[:0]
    if d.size == 0:
        return 0.0
    idx = np.arange(d.size)
    half = d.size // 2 if tail else 0
    sel = (idx >= half) & (d > floor)
    if sel.sum() < 2:
        sel = d > 0
    if sel.sum() < 2:
        return 0.0
    slope = np.polyfit(idx[sel], np.log(d[sel]), 1)[0]
    return float(math.exp(slope))


def normal_form_orbit(jets: Sequence[Jet], weights: Optional[Sequence] = None, degree: Optional[int] = None,
                      tol: float = 1e-9, horizon: Optional[int] = None, keep_history: bool = False) -> ConjugacyResult:
    """``N^(n) = (PA^(n))^{-1} o A^(n)`` along an orbit of jets ``A_0, A_1, ...``.

    Uses ``N^(n+1) = (PA^(n))^{-1} o (PA_n^{-1} o A_n) o PA^(n) o N^(n)``.
    The verdict is ``"converged"`` if the last deviation is below ``tol``
    and the fitted rate is below 1, ``"diverged"`` if the rate is at least
    1, and ``"inconclusive"`` otherwise.
    """
    jets = list(jets)
    if not jets:
        raise ValueError("need at least one jet")
    weights = jets[0].weights if weights is None else tuple(_as_weight(w) for w in weights)
    D = jets[0].degree if degree is None else int(degree)
    horizon = len(jets) if horizon is None else min(int(horizon), len(jets))
    n = jets[0].dim
    mode = jets[0].mode
    N = Jet.identity(n, D, weights, mode)
    PAn = Jet.identity(n, D, weights, mode)
    PAn_inv = PAn
    devs: List[float] = []
    hist = []
    for k in range(horizon):
        A = Jet(jets[k].comps, D, weights, jets[k].mode)
        PA, _ = sr_split(A, weights)
        step = jet_compose(jet_invert(PA), A)
        new = jet_compose(PAn_inv, jet_compose(step, jet_compose(PAn, N)))
        devs.append(max((abs(float(c)) for comp in (new - N) for c in comp.values()), default=0.0))
        N = new
        PAn = jet_compose(PA, PAn)
        PAn_inv = jet_compose(PAn_inv, jet_invert(PA))
        if keep_history:
            hist.append(N)
    rate = fit_rate(devs)
    if devs and devs[-1] < tol and rate < 1:
        verdict = "converged"
    elif rate >= 1:
        verdict = "diverged"
    else:
        verdict = "inconclusive"
    PA0, _ = sr_split(Jet(jets[0].comps, D, weights, jets[0].mode), weights)
    return ConjugacyResult(tuple(weights), D, N, PA0, devs, rate, verdict, horizon, hist)


# -- graded holonomy ---------------------------------------------------------------------

@dataclass
class HolonomyResult:
    H: np.ndarray
    increments: List[float]
    ratio: float
    tail: float
    verdict: str
    blocks: List[int]

    def to_json(self) -> dict:
        return {"H": self.H.tolist(), "increments": [float(x) for x in self.increments], "ratio": self.ratio,
                "tail_estimate": self.tail, "verdict": self.verdict, "blocks": self.blocks}


def _diag_blocks(A: np.ndarray, blocks: Sequence[int]) -> List[np.ndarray]:
    out, a = [], 0
    for m in blocks:
        out.append(A[a:a + m, a:a + m])
        a += m
    return out


def holonomy_graded(mats_x: np.ndarray, mats_y: np.ndarray, t_max: int, blocks: Optional[Sequence[int]] = None,
                    identification=None) -> HolonomyResult:
    """``H(x, y) = lim B_t(y)^{-1} I B_t(x)`` on each diagonal block.

    ``mats_x[n]`` and ``mats_y[n]`` are the cocycle along the forward orbits
    of ``x`` and ``y``; ``blocks`` lists graded block sizes (default: one
    block).  ``identification`` (default identity) is a callable
    ``n -> matrix`` identifying fibers at ``x_n`` and ``y_n``.
    Increments are ``||H_{n+1} - H_n||``.
    """
    mats_x = np.asarray(mats_x, dtype=float)
    mats_y = np.asarray(mats_y, dtype=float)
    k = mats_x.shape[1]
    blocks = [k] if blocks is None else list(blocks)
    if sum(blocks) != k:
        raise ValueError("block sizes must add up to the fiber dimension")
    if t_max > len(mats_x) or t_max > len(mats_y):
        raise ValueError("traces shorter than t_max")
    if identification is None and np.array_equal(mats_x[:t_max], mats_y[:t_max]):
        # x = y: every term B_t(x)^{-1} B_t(x) is the identity, so is the limit
        return HolonomyResult(np.eye(k), [0.0] * t_max, 0.0, 0.0, "converged", blocks)
    I = (lambda n: np.eye(k)) if identification is None else identification
    Bx = [np.eye(m) for m in blocks]
    By_inv = [np.eye(m) for m in blocks]
    H = [blk for blk in _diag_blocks(I(0), blocks)]
    incs = []
    for n in range(t_max):
        Xb = _diag_blocks(mats_x[n], blocks)
        Yb = _diag_blocks(mats_y[n], blocks)
        In1 = _diag_blocks(I(n + 1), blocks)
        newH = []
        for i in range(len(blocks)):
            Bx_next = Xb[i] @ Bx[i]
            By_inv_next = By_inv[i] @ np.linalg.inv(Yb[i])
            newH.append(By_inv_next @ In1[i] @ Bx_next)
            Bx[i], By_inv[i] = Bx_next, By_inv_next
        incs.append(max(float(np.abs(a - b).max()) for a, b in zip(newH, H)))
        H = newH
    scale = max(1.0, max(float(np.abs(b).max()) for b in H))
    floor = 64 * np.finfo(float).eps * scale
    ratio = fit_rate(incs, floor=floor, tail=False)
    tail = incs[-1] * ratio / (1 - ratio) if incs and ratio < 1 else math.inf
    tail = max(tail, floor)
    if all(x == 0 for x in incs):
        verdict, tail = "converged", 0.0
    elif ratio < 1:
        verdict = "converged"
    else:
        verdict = "non-summable"
    Hfull = np.zeros((k, k))
    a = 0
    for m, blk in zip(blocks, H):
        Hfull[a:a + m, a:a + m] = blk
        a += m
    return HolonomyResult(Hfull, incs, ratio, tail, verdict, blocks)
