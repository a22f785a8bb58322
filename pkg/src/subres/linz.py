"""Linearization of subresonant maps.

``P_V`` is the space of polynomial functions on ``V`` of weight at most a
cutoff (``lambda_1`` by default), constants included.  ``L_V`` is its dual
and ``ev: V -> L_V`` sends a point to the list of basis monomials evaluated
there.  A subresonant map ``F: V -> W`` acts on ``L`` by the matrix

    rho(F)[a, b] = coefficient of monomial b in F^*(monomial a),

so that ``ev(F(v)) = rho(F) ev(v)`` and ``rho(F o G) = rho(F) rho(G)``.
Rows are indexed by the target basis, columns by the source basis.

The basis is sorted by ``(weight, exponents)`` ascending, so pullback (which
never raises weight) only couples a row to columns of weight at most its
own.  With this ordering the matrices come out lower block-triangular.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import exact
from . import polynomial as P
from .errors import ClassViolation, SpaceMismatch
from .sralg import (PolyMap, WeightedSpace, is_subresonant, monomial_weight, monomials_up_to)

Exps = Tuple[int, ...]


@dataclass(frozen=True)
class LinBasis:
    space: WeightedSpace
    cutoff: Fraction
    monomials: Tuple[Exps, ...]
    index: Dict[Exps, int] = field(compare=False, hash=False, repr=False, default=None)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {m: k for k, m in enumerate(self.monomials)})

    def __len__(self):
        return len(self.monomials)

    def weight(self, k: int) -> Fraction:
        return monomial_weight(self.monomials[k], self.space)

    def weights(self) -> List[Fraction]:
        return [self.weight(k) for k in range(len(self))]

    def coordinate_rows(self) -> List[int]:
        """Positions of the coordinate functions x_1..x_l."""
        n = self.space.dim
        return [self.index[P.unit_exps(i, n)] for i in range(n)]

    def names(self) -> List[str]:
        out = []
        for m in self.monomials:
            parts = [c if k == 1 else f"{c}^{k}" for c, k in zip(self.space.coords, m) if k]
            out.append("*".join(parts) if parts else "1")
        return out

    def to_json(self) -> dict:
        return {"space": self.space.to_json(), "cutoff": str(self.cutoff), "monomials": [list(m) for m in self.monomials]}


def enumerate_basis(space: WeightedSpace, cutoff=None) -> LinBasis:
    cutoff = space.top_weight if cutoff is None else Fraction(cutoff)
    if cutoff < space.top_weight:
        raise ValueError(f"cutoff {cutoff} is below the top weight {space.top_weight}; ev would not be injective")
    return LinBasis(space, cutoff, monomials_up_to(space, cutoff))


def ev(point: Sequence, basis: LinBasis) -> List:
    if len(point) != basis.space.dim:
        raise SpaceMismatch("point has wrong dimension")
    out = []
    for m in basis.monomials:
        t = Fraction(1) if not isinstance(point[0], float) else 1.0
        for x, k in zip(point, m):
            if k:
                t = t * x**k
        out.append(t)
    return out


@dataclass(frozen=True)
class LinRep:
    """``rho(F)`` stored as sparse rows; use :meth:`dense` for a full matrix."""

    basis_src: LinBasis
    basis_tgt: LinBasis
    rows: Tuple[Dict[int, Fraction], ...]

    def dense(self) -> List[List[Fraction]]:
        return exact.sp_to_dense(list(self.rows), len(self.basis_src))

    def apply(self, vec: Sequence) -> List:
        out = []
        for row in self.rows:
            acc = 0 * vec[0]
            for j, c in row.items():
                acc = acc + c * vec[j]
            out.append(acc)
        return out

    def __matmul__(self, other: "LinRep") -> "LinRep":
        if other.basis_tgt != self.basis_src:
            raise SpaceMismatch("bases do not match")
        return LinRep(other.basis_src, self.basis_tgt, tuple(exact.sp_mul(list(self.rows), list(other.rows))))

    def __eq__(self, other):
        if not isinstance(other, LinRep):
            return NotImplemented
        return self.basis_src == other.basis_src and self.basis_tgt == other.basis_tgt and self.rows == other.rows

    def __hash__(self):
        return hash((self.basis_src, self.basis_tgt))

    def to_json(self) -> dict:
        return {
            "basis_src": self.basis_src.to_json(),
            "basis_tgt": self.basis_tgt.to_json(),
            "matrix": [[str(x) for x in row] for row in self.dense()],
        }


def _pullback_rows(comps: Sequence[dict], basis_tgt: LinBasis, basis_src: LinBasis) -> List[Dict[int, Fraction]]:
    n_src = basis_src.space.dim
    cache: dict = {}
    rows = []
    for m in basis_tgt.monomials:
        pulled = P.compose({m: Fraction(1)}, comps, n_src, cache=cache)
        row = {}
        for e, c in pulled.items():
            j = basis_src.index.get(e)
            if j is None:
                raise ClassViolation(f"pullback of {m} contains {e}, outside the source basis")
            row[j] = c
        rows.append(row)
    return rows


def linearize(F: PolyMap, cutoff=None) -> LinRep:
    """Matrix of ``F`` acting on ``L``; the source cutoff is raised if the target needs it."""
    if not is_subresonant(F):
        raise ClassViolation(f"map is not subresonant: {F.to_text()}")
    Bt = enumerate_basis(F.target, cutoff)
    Bs = Bt if F.source == F.target else enumerate_basis(F.source, max(Bt.cutoff, F.source.top_weight))
    return LinRep(Bs, Bt, tuple(_pullback_rows(F.comps, Bt, Bs)))


def check_filtration(rows: Sequence[Dict[int, object]], basis_tgt: LinBasis, basis_src: LinBasis) -> Optional[Tuple[int, int]]:
    """First ``(row, col)`` coupling a row to a column of higher weight, or None."""
    wt = basis_tgt.weights()
    ws = basis_src.weights()
    for a, row in enumerate(rows):
        for b in row:
            if ws[b] > wt[a]:
                return a, b
    return None


def delinearize(g, basis_src: Optional[LinBasis] = None, basis_tgt: Optional[LinBasis] = None) -> PolyMap:
    """Recover the subresonant map whose linearization is ``g``.

    ``g`` may be a dense matrix, a list of sparse rows, or a :class:`LinRep`.
    The coordinate-function rows give the candidate map; it is accepted only
    if it re-linearizes to exactly ``g``.
    """
    if isinstance(g, LinRep):
        basis_src, basis_tgt, rows = g.basis_src, g.basis_tgt, list(g.rows)
    else:
        basis_tgt = basis_src if basis_tgt is None else basis_tgt
        rows = [dict(r) for r in g] if g and isinstance(g[0], dict) else exact.sp_from_dense(g)
    if len(rows) != len(basis_tgt):
        raise SpaceMismatch("matrix height does not match the target basis")
    bad = check_filtration(rows, basis_tgt, basis_src)
    if bad is not None:
        raise ClassViolation(f"entry {bad} raises weight; not filtration preserving")
    const = basis_tgt.index[P.zero_exps(basis_tgt.space.dim)]
    if rows[const] != {basis_src.index[P.zero_exps(basis_src.space.dim)]: 1}:
        raise ClassViolation("constant functional is not fixed; ev(V) is not preserved")
    comps = []
    for k in basis_tgt.coordinate_rows():
        comps.append({basis_src.monomials[j]: Fraction(c) for j, c in rows[k].items()})
    F = PolyMap(basis_src.space, basis_tgt.space, comps)
    if not is_subresonant(F):
        raise ClassViolation("coordinate rows do not define a subresonant map")
    again = _pullback_rows(F.comps, basis_tgt, basis_src)
    if again != [{j: Fraction(c) for j, c in r.items()} for r in rows]:
        raise ClassViolation("matrix does not preserve ev(V): re-linearization differs")
    return F


# -- derivations ---------------------------------------------------------------

def derivation_rows(comps: Sequence[Dict[Exps, object]], basis: LinBasis) -> List[Dict[int, object]]:
    """Matrix of the derivation ``D_X = sum_i X_i d/dx_i`` on ``P``.

    Row a holds the coefficients of ``D_X(m_a)``; coefficients may be any
    ring elements (rationals, or :class:`~subres.polynomial.Poly`).  With
    this convention ``rho(exp X) = exp(M_X)``.
    """
    rows = []
    for m in basis.monomials:
        acc: Dict[int, object] = {}
        for i, Xi in enumerate(comps):
            k = m[i]
            if not k or not Xi:
                continue
            dm = list(m)
            dm[i] -= 1
            for e, c in Xi.items():
                prod = tuple(a + b for a, b in zip(dm, e))
                j = basis.index.get(prod)
                if j is None:
                    raise ClassViolation("vector field raises weight beyond the basis cutoff")
                v = acc.get(j)
                acc[j] = c * k if v is None else v + c * k
        rows.append({j: v for j, v in acc.items() if v})
    return rows


def read_derivation(rows: Sequence[Dict[int, object]], basis: LinBasis) -> List[Dict[Exps, object]]:
    """Vector field components from a derivation matrix (its coordinate rows)."""
    return [{basis.monomials[j]: c for j, c in rows[k].items()} for k in basis.coordinate_rows()]
