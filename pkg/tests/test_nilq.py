from fractions import Fraction

import pytest
from hypothesis import given

from conftest import seeds, spaces
from subres import nilq, sralg
from subres.errors import ClassViolation
from subres.nilq import SsrVectorField as VF
from subres.rng import SplitMix64
from subres.sralg import PolyMap, WeightedSpace


def vf(text, V):
    return VF.from_text(text, V)


@pytest.fixture
def U2(V321):
    # span of y d/dx, z d/dx
    return nilq.generated_subalgebra([vf("x <- y", V321), vf("x <- z", V321)])


# -- brackets ----------------------------------------------------------------------

def test_bracket_examples(V321):
    X, Y = vf("y <- z", V321), vf("x <- y", V321)
    assert not nilq.bracket(X, X)
    assert nilq.bracket(X, Y) == vf("x <- z", V321)


def test_bracket_chain_vanishes(V321):
    r = SplitMix64(5)
    Xs = [nilq.random_field(V321, r, 0.8) for _ in range(nilq.nilpotency_bound(V321) + 1)]
    Z = Xs[0]
    for X in Xs[1:]:
        Z = nilq.bracket(X, Z)
    assert not Z


@given(spaces, seeds)
def test_bracket_antisymmetric_and_jacobi(V, seed):
    r = SplitMix64(seed)
    X, Y, Z = (nilq.random_field(V, r, 0.5) for _ in range(3))
    b = nilq.bracket
    assert b(X, Y) == b(Y, X).scaled(-1)
    assert not (b(X, b(Y, Z)) + b(Y, b(Z, X)) + b(Z, b(X, Y)))


def test_strictness_enforced(V321):
    with pytest.raises(ClassViolation):
        VF(V321, [{(0, 1, 1): Fraction(1)}, {}, {}], strict=True)


# -- exp / log ---------------------------------------------------------------------------

def test_exp_examples(V321):
    assert nilq.exp_ssr(VF.zero(V321)).is_identity()
    t = Fraction(5, 3)
    assert nilq.exp_ssr(vf("y <- z", V321).scaled(t)) == PolyMap.from_text("x <- x ; y <- y + 5/3 * z ; z <- z", V321)
    # y d/dx + z d/dy is a linear field here; its flow gives x + y + z/2
    E = nilq.exp_ssr(vf("x <- y ; y <- z", V321))
    assert E == PolyMap.from_text("x <- x + y + 1/2 * z ; y <- y + z ; z <- z", V321)


def test_exp_matches_jet_integration():
    V = WeightedSpace.from_weights([5, 2, 1])
    # integrate dx/dt = X(x) by hand: y(t) = y + tz, x' = (y + tz)^2 + z, evaluate at t = 1
    X = vf("x <- y^2 + z ; y <- z", V)
    expected = PolyMap.from_text("x <- x + y^2 + z + y * z + 1/3 * z^2 ; y <- y + z ; z <- z", V)
    assert nilq.exp_ssr(X) == expected


def test_log_examples(V21):
    assert not nilq.log_ssr(PolyMap.identity(V21))
    F = PolyMap.from_text("x <- x + 3 * y^2 ; y <- y", V21)
    assert nilq.log_ssr(F) == VF.from_slots(V21, {(0, (0, 2)): 3})


def test_exp_log_200_roundtrip():
    r = SplitMix64(77)
    for k in range(200):
        V = WeightedSpace.from_weights([(1,), (2, 1), (3, 2, 1), (3, 2, 2, 1)][k % 4])
        F = sralg.random_ssr(V, r, 0.5)
        assert nilq.exp_ssr(nilq.log_ssr(F)) == F


@given(spaces, seeds)
def test_log_exp_roundtrip(V, seed):
    X = nilq.random_field(V, SplitMix64(seed), 0.5)
    assert nilq.log_ssr(nilq.exp_ssr(X)) == X


# -- BCH -------------------------------------------------------------------------------------

def test_bch_examples(V321):
    X, Y = vf("y <- z", V321), vf("x <- y", V321)
    assert nilq.bch(X, Y) == X + Y + vf("x <- z", V321).scaled(Fraction(1, 2))
    A, B = vf("x <- z", V321), vf("x <- y", V321)
    assert nilq.bch(A, B) == A + B
    assert not nilq.bch(X + Y, (X + Y).scaled(-1))


@given(spaces, seeds)
def test_bch_is_group_law(V, seed):
    r = SplitMix64(seed)
    X, Y, Z = (nilq.random_field(V, r, 0.4) for _ in range(3))
    XY = nilq.bch(X, Y)
    # exp(bch(X, Y)) = exp(Y) o exp(X) as maps (X's flow applied first)
    assert nilq.exp_ssr(XY) == sralg.compose(nilq.exp_ssr(Y), nilq.exp_ssr(X))
    assert nilq.bch(XY, Z) == nilq.bch(X, nilq.bch(Y, Z))
    assert XY == nilq.bch_series(X, Y)


# -- subalgebras and charts -------------------------------------------------------------------

def test_subalgebra_closure_checked(V321):
    with pytest.raises(ClassViolation):
        nilq.Subalgebra(V321, [vf("y <- z", V321), vf("x <- y", V321)])
    U = nilq.generated_subalgebra([vf("y <- z", V321), vf("x <- y", V321)])
    assert U.dim == 3 and U.contains(vf("x <- z", V321))


def test_chart_trivial_cases(V321, U2):
    T = nilq.TransversalChart(U2)
    v = [Fraction(k + 1) for k in range(len(T.v_index))]
    u = [Fraction(-k - 2) for k in range(len(T.u_index))]
    zero_u = [0] * len(T.u_index)
    zero_v = [0] * len(T.v_index)
    assert nilq.ch_chart(T, v, zero_u) == T.element(T.join(v, zero_u))
    assert nilq.ch_chart(T, zero_v, u) == T.element(T.join(zero_v, u))
    assert nilq.ch_inverse(T, nilq.ch_chart(T, v, u)) == (v, u)


def test_coset_reduce_trivial(U2):
    T = nilq.TransversalChart(U2)
    n_u = U2.element([3, -1])
    assert nilq.coset_reduce(T, n_u) == [0] * len(T.v_index)
    v = [Fraction(k, 3) for k in range(len(T.v_index))]
    n_v = T.element(T.join(v, [0] * len(T.u_index)))
    assert nilq.coset_reduce(T, n_v) == v
    assert nilq.coset_reduce(T, n_v, method="chart") == v


@given(spaces, seeds)
def test_chart_laws(V, seed):
    r = SplitMix64(seed)
    gens = [nilq.random_field(V, r, 0.3) for _ in range(2)]
    gens = [g for g in gens if g]
    if not gens:
        return
    T = nilq.TransversalChart(nilq.generated_subalgebra(gens))
    ch, chi = T.chart_map(), T.chart_inverse()
    I = PolyMap.identity(T.chart_space)
    assert sralg.compose_unchecked(ch, chi) == I and sralg.compose_unchecked(chi, ch) == I
    # subresonant with identity linear part in either direction
    assert sralg.is_unipotent(ch) and sralg.is_unipotent(chi)
    v = [r.rational(3, 2) for _ in T.v_index]
    u = [r.rational(3, 2) for _ in T.u_index]
    n = nilq.ch_chart(T, v, u)
    w = T.subalgebra.element([r.rational(3, 2) for _ in range(T.subalgebra.dim)])
    assert nilq.coset_reduce(T, nilq.bch(n, w)) == v
    assert nilq.coset_reduce(T, nilq.bch(n, w), method="chart") == v


def test_change_of_transversal_identity(U2):
    T = nilq.TransversalChart(U2)
    M = nilq.change_of_transversal(T, T)
    assert M.is_identity()


def test_bad_transversal_rejected(V321, U2):
    with pytest.raises(ClassViolation):
        nilq.TransversalChart(U2, transversal=[vf("x <- y", V321), vf("y <- z", V321)])


# -- Haar measure -------------------------------------------------------------------

def test_haar_examples(U2):
    assert nilq.haar_pushforward(U2, [(0, 1), (0, 1)]) == 1
    c = Fraction(3, 2)
    assert nilq.haar_pushforward(U2, [(0, c), (0, c)]) == c ** 2
    with pytest.raises(ValueError):
        nilq.haar_pushforward(U2, [(0, 1), (1, 1)])


@given(seeds)
def test_translation_jacobian_is_one(seed):
    V = WeightedSpace.from_weights([3, 2, 1])
    r = SplitMix64(seed)
    U = nilq.generated_subalgebra([vf("y <- z", V), vf("x <- y", V)])
    u0 = [r.rational(4, 3) for _ in range(U.dim)]
    at = [r.rational(4, 3) for _ in range(U.dim)]
    assert nilq.translation_jacobian(U, u0, at) == 1


def test_haar_translation_monte_carlo():
    V = WeightedSpace.from_weights([3, 2, 1])
    U = nilq.generated_subalgebra([vf("y <- z", V), vf("x <- y", V)])
    res = nilq.haar_translation_mc(U, [(0, 1)] * 3, [1, -1, 2], samples=20000, seed=1)
    assert abs(res["estimate"] - 1.0) < 5 * res["stderr"] + 1e-3
