"""Randomized exact-law batteries for sralg, linz and nilq.

Each law is checked on ``samples`` random instances per weight profile with
rational arithmetic and zero tolerance.  The first failing instance of each
law is kept verbatim (serialized maps) as a counterexample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

from . import linz, nilq, sralg
from .rng import SplitMix64

log = logging.getLogger(__name__)

ALGEBRA_LAWS = ("composition_closure", "ssr_inverse", "linearization_homomorphism", "ev_equivariance",
                "delinearize_roundtrip")
NILPOTENT_LAWS = ("jacobi", "exp_log_roundtrip", "bch_associativity", "chart_inverse", "chart_subresonant",
                  "coset_invariance")


@dataclass
class LawTally:
    passed: int = 0
    failed: int = 0
    counterexample: Optional[dict] = None

    def record(self, ok: bool, witness: Callable[[], dict]):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if self.counterexample is None:
                self.counterexample = witness()

    def to_json(self) -> dict:
        d = {"passed": self.passed, "failed": self.failed}
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample
        return d


@dataclass
class SuiteReport:
    profiles: List[List[str]]
    samples: int
    seed: int
    laws: Dict[str, Dict[str, LawTally]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(t.failed == 0 for per in self.laws.values() for t in per.values())

    def counterexamples(self) -> List[dict]:
        out = []
        for prof, per in self.laws.items():
            for law, t in per.items():
                if t.counterexample is not None:
                    out.append({"profile": prof, "law": law, **t.counterexample})
        return out

    def to_json(self) -> dict:
        return {
            "profiles": self.profiles,
            "samples": self.samples,
            "seed": self.seed,
            "all_passed": self.ok,
            "laws": {p: {k: v.to_json() for k, v in per.items()} for p, per in self.laws.items()},
            "warnings": self.warnings,
        }


def _profile_key(space: sralg.WeightedSpace) -> str:
    return "(" + ",".join(str(w) for w in space.weights) + ")"


def algebra_battery(space: sralg.WeightedSpace, samples: int, rng: SplitMix64,
                    compose_fn: Callable = sralg.compose) -> Dict[str, LawTally]:
    tallies = {law: LawTally() for law in ALGEBRA_LAWS}
    ident = sralg.PolyMap.identity(space)
    for _ in range(samples):
        F = sralg.random_subresonant(space, rng, density=0.4)
        G = sralg.random_subresonant(space, rng, density=0.4)
        S = sralg.random_unipotent(space, rng, density=0.4) if rng.bernoulli(0.5) else sralg.random_ssr(space, rng, 0.4)
        pt = sralg.random_point(space, rng)

        FG = compose_fn(F, G)
        tallies["composition_closure"].record(
            sralg.is_subresonant(FG) and FG(pt) == F(G(pt)),
            lambda: {"F": F.to_json(), "G": G.to_json(), "FoG": FG.to_json()})

        Sinv = sralg.invert_ssr(S)
        tallies["ssr_inverse"].record(
            sralg.compose(S, Sinv) == ident and sralg.compose(Sinv, S) == ident,
            lambda: {"F": S.to_json(), "inverse": Sinv.to_json()})

        LF, LG, LFG = linz.linearize(F), linz.linearize(G), linz.linearize(FG)
        tallies["linearization_homomorphism"].record(
            LF @ LG == LFG, lambda: {"F": F.to_json(), "G": G.to_json()})

        B = LF.basis_src
        tallies["ev_equivariance"].record(
            linz.ev(F(pt), B) == LF.apply(linz.ev(pt, B)),
            lambda: {"F": F.to_json(), "point": [str(x) for x in pt]})

        try:
            back = linz.delinearize(LF)
            ok = back == F
        except ValueError:
            back, ok = None, False
        tallies["delinearize_roundtrip"].record(
            ok, lambda: {"F": F.to_json(), "recovered": None if back is None else back.to_json()})
    return tallies


def _random_subalgebra(space, rng) -> nilq.Subalgebra:
    gens = [nilq.random_field(space, rng, density=0.3) for _ in range(1 + rng.integers(0, 1))]
    gens = [g for g in gens if g] or [nilq.SsrVectorField.from_slots(space, {nilq.lie_slots(space)[-1]: 1})]
    return nilq.generated_subalgebra(gens)


def nilpotent_battery(space: sralg.WeightedSpace, samples: int, rng: SplitMix64,
                      charts_every: int = 1) -> Dict[str, LawTally]:
    tallies = {law: LawTally() for law in NILPOTENT_LAWS}
    T = None
    for k in range(samples):
        X, Y, Z = (nilq.random_field(space, rng, 0.4) for _ in range(3))
        br = nilq.bracket
        jac = br(X, br(Y, Z)) + br(Y, br(Z, X)) + br(Z, br(X, Y))
        tallies["jacobi"].record(not jac, lambda: {"X": X.to_text(), "Y": Y.to_text(), "Z": Z.to_text()})

        E = nilq.exp_ssr(X)
        tallies["exp_log_roundtrip"].record(
            nilq.log_ssr(E) == X and sralg.classify(E) & sralg.MapClass.STRICTLY_SUBRESONANT,
            lambda: {"X": X.to_text(), "exp": E.to_json()})

        lhs = nilq.bch(nilq.bch(X, Y), Z)
        rhs = nilq.bch(X, nilq.bch(Y, Z))
        tallies["bch_associativity"].record(lhs == rhs, lambda: {"X": X.to_text(), "Y": Y.to_text(), "Z": Z.to_text()})

        if T is None or k % charts_every == 0:
            T = nilq.TransversalChart(_random_subalgebra(space, rng))
            ch, chi = T.chart_map(), T.chart_inverse()
            ident = sralg.PolyMap.identity(T.chart_space)
            chart_ok = sralg.compose_unchecked(ch, chi) == ident and sralg.compose_unchecked(chi, ch) == ident
            sub_ok = sralg.is_unipotent(ch) and sralg.is_unipotent(chi)
        v = [rng.rational(4, 3) for _ in T.v_index]
        u = [rng.rational(4, 3) for _ in T.u_index]
        n = nilq.ch_chart(T, v, u)
        rt = nilq.ch_inverse(T, n)
        tallies["chart_inverse"].record(
            chart_ok and rt == (v, u) and T.coordinates(n) == list(ch(T.join(v, u))),
            lambda: {"subalgebra": T.subalgebra.to_json(), "v": [str(a) for a in v], "u": [str(a) for a in u]})
        tallies["chart_subresonant"].record(
            sub_ok, lambda: {"subalgebra": T.subalgebra.to_json(), "chart": ch.to_json()})

        u2 = T.subalgebra.element([rng.rational(4, 3) for _ in range(T.subalgebra.dim)])
        r1 = nilq.coset_reduce(T, n)
        r2 = nilq.coset_reduce(T, nilq.bch(n, u2))
        tallies["coset_invariance"].record(
            r1 == r2 == [Fraction(a) for a in v],
            lambda: {"subalgebra": T.subalgebra.to_json(), "n": n.to_text(), "u": u2.to_text()})
    return tallies


def algebra_suite(profiles: Sequence[Sequence], samples: int = 500, seed: int = 0,
                  compose_fn: Callable = sralg.compose, nilpotent_samples: Optional[int] = None,
                  include: Sequence[str] = ("algebra", "nilpotent")) -> SuiteReport:
    """Run the exact-law batteries; ``compose_fn`` can be swapped to test the harness."""
    spaces = [sralg.WeightedSpace.from_weights(p) for p in profiles]
    rep = SuiteReport([[str(w) for w in s.weights] for s in spaces], samples, seed)
    if samples == 0:
        rep.warnings.append("0 samples requested: all laws pass vacuously")
    rng = SplitMix64(seed)
    nsamp = samples if nilpotent_samples is None else nilpotent_samples
    for space in spaces:
        child = rng.spawn()
        per: Dict[str, LawTally] = {}
        if "algebra" in include:
            per.update(algebra_battery(space, samples, child.spawn(), compose_fn))
        if "nilpotent" in include:
            per.update(nilpotent_battery(space, nsamp, child.spawn()))
        rep.laws[_profile_key(space)] = per
        log.info("profile %s done", _profile_key(space))
    return rep
