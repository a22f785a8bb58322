from fractions import Fraction

import pytest
from hypothesis import given

from conftest import seeds, spaces
from subres import exact, linz, sralg
from subres.errors import ClassViolation
from subres.rng import SplitMix64
from subres.sralg import PolyMap, WeightedSpace


def names(B):
    return set(B.names())


def test_enumerate_basis_examples(V321, V21):
    B = linz.enumerate_basis(V321)
    assert names(B) == {"1", "z", "z^2", "z^3", "y", "y*z", "x"} and len(B) == 7
    assert names(linz.enumerate_basis(WeightedSpace.from_weights([1]))) == {"1", "x"}
    assert names(linz.enumerate_basis(V21)) == {"1", "y", "y^2", "x"}
    # ascending weight order
    assert B.weights() == sorted(B.weights())


def test_cutoff_below_top_weight_rejected(V21):
    with pytest.raises(ValueError):
        linz.enumerate_basis(V21, 1)


def test_ev_examples(V21):
    B = linz.enumerate_basis(V21)
    assert B.names() == ["1", "y", "y^2", "x"]
    assert linz.ev([5, 2], B) == [1, 2, 4, 5]
    assert linz.ev([0, 0], B) == [1, 0, 0, 0]
    assert linz.ev([1, 2], B) != linz.ev([2, 2], B)


def test_linearize_examples(V21):
    B = linz.enumerate_basis(V21)
    assert linz.linearize(PolyMap.identity(V21)).dense() == exact.identity(len(B))
    F = PolyMap.from_text("x <- x + y^2 ; y <- y", V21)
    rows = linz.linearize(F).dense()
    assert rows[B.index[(1, 0)]] == [0, 0, 1, 1]


def test_linearize_triangular_diagonal(V321):
    # diagonal of rho(F) for a diagonal linear part (p, q, r) is the monomial eigenvalues
    p, q, r = Fraction(2), Fraction(3), Fraction(5)
    F = PolyMap.from_text("x <- 2 * x + 7 * z + 1 * y + 4 * y * z ; y <- 3 * y + 6 * z ; z <- 5 * z", V321)
    L = linz.linearize(F)
    M = L.dense()
    B = L.basis_src
    for k, (i, j, l) in enumerate(B.monomials):
        assert M[k][k] == p ** i * q ** j * r ** l
    # filtration: no entry couples a row to a heavier column
    assert linz.check_filtration(L.rows, B, B) is None


def test_linearize_rejects_nonsubresonant(V21):
    with pytest.raises(ClassViolation):
        linz.linearize(PolyMap.from_text("x <- x ; y <- y + x", V21))


@given(spaces, seeds)
def test_homomorphism_and_equivariance(V, seed):
    r = SplitMix64(seed)
    F, G = sralg.random_subresonant(V, r, 0.4), sralg.random_subresonant(V, r, 0.4)
    assert linz.linearize(F) @ linz.linearize(G) == linz.linearize(sralg.compose(F, G))
    pt = sralg.random_point(V, r)
    LF = linz.linearize(F)
    assert linz.ev(F(pt), LF.basis_tgt) == LF.apply(linz.ev(pt, LF.basis_src))


def test_delinearize_roundtrip_100():
    r = SplitMix64(2024)
    for k in range(100):
        V = WeightedSpace.from_weights([(1,), (2, 1), (3, 2, 1), (3, 2, 2, 1)][k % 4])
        F = sralg.random_subresonant(V, r, 0.5)
        assert linz.delinearize(linz.linearize(F)) == F


def test_delinearize_identity(V321):
    B = linz.enumerate_basis(V321)
    assert linz.delinearize(exact.identity(len(B)), B).is_identity()


def test_delinearize_rejects_bad_matrices(V21):
    B = linz.enumerate_basis(V21)
    M = exact.identity(len(B))
    M[0][0] = Fraction(2)
    with pytest.raises(ClassViolation):
        linz.delinearize(M, B)
    # weight-raising entry: y-row picks up x
    M = exact.identity(len(B))
    M[B.index[(0, 1)]][B.index[(1, 0)]] = Fraction(1)
    with pytest.raises(ClassViolation):
        linz.delinearize(M, B)
    # coordinate rows fine but the y^2 row is inconsistent with them
    M = exact.identity(len(B))
    M[B.index[(0, 2)]][B.index[(0, 1)]] = Fraction(1)
    with pytest.raises(ClassViolation):
        linz.delinearize(M, B)


def test_derivation_matrix_exponentiates(V321):
    from subres import nilq
    X = nilq.SsrVectorField.from_text("x <- y ; y <- z", V321)
    B = linz.enumerate_basis(V321)
    D = linz.derivation_rows(X.comps, B)
    E = exact.sp_exp_nilpotent(D, len(B))
    assert [dict(r) for r in E] == [dict(r) for r in linz.linearize(nilq.exp_ssr(X)).rows]
