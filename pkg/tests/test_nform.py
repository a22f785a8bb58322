import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import seeds
from subres import cocyc, nform
from subres.errors import SmallDivisor
from subres.nform import Jet
from subres.rng import SplitMix64

F = Fraction
W12 = (1, 2)


def jet(comps, degree=4, weights=W12, mode="rational"):
    return Jet(tuple(comps), degree, weights, mode)


def A_example(degree=4):
    # (x/2, y/4 + x^2 + x^3)
    return jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 1, (3, 0): 1}], degree)


def random_jet(seed, n=2, degree=4):
    r = SplitMix64(seed)
    comps = []
    for i in range(n):
        d = {tuple(int(j == i) for j in range(n)): r.rational(3, 4, nonzero=True)}
        for _ in range(4):
            e = [0] * n
            for _ in range(r.integers(2, degree)):
                e[r.integers(0, n - 1)] += 1
            d[tuple(e)] = r.rational(3, 3)
        comps.append(d)
    return Jet(tuple(comps), degree, None)


# -- jet arithmetic -------------------------------------------------------------------------

def test_jet_rejects_constants_and_float_weights():
    with pytest.raises(ValueError):
        jet([{(0, 0): 1}, {}])
    with pytest.raises(ValueError):
        Jet(({(1,): 1},), 3, (0.5,))


def test_compose_identity():
    A = A_example()
    I = Jet.identity(2, 4, W12)
    assert nform.jet_compose(A, I).comps == A.comps
    assert nform.jet_compose(I, A).comps == A.comps


def test_invert_series_reversion():
    f = Jet(({(1,): 2, (2,): 1},), 3)
    assert nform.jet_invert(f).comps == ({(1,): F(1, 2), (2,): F(-1, 8), (3,): F(1, 16)},)


@given(seeds, seeds, seeds)
def test_compose_associative(a, b, c):
    f, g, h = random_jet(a), random_jet(b), random_jet(c)
    jc = nform.jet_compose
    assert jc(jc(f, g), h).comps == jc(f, jc(g, h)).comps


@given(seeds)
def test_invert_is_two_sided(seed):
    f = random_jet(seed)
    g = nform.jet_invert(f)
    I = Jet.identity(2, 4).comps
    assert nform.jet_compose(f, g).comps == I and nform.jet_compose(g, f).comps == I


def test_float_and_rational_agree():
    f = random_jet(11)
    a = nform.jet_invert(f).to_float()
    b = nform.jet_invert(f.to_float())
    diff = [{e: float(c) for e, c in comp.items()} for comp in (a - b)]
    assert max((abs(c) for comp in diff for c in comp.values()), default=0.0) < 1e-12


# -- splitting ---------------------------------------------------------------------------------

def test_sr_split_example():
    a, b, c = F(3), F(5), F(7)
    A = jet([{(1, 0): F(1, 2), (0, 1): a}, {(0, 1): F(1, 4), (2, 0): b, (3, 0): c}])
    PA, R = nform.sr_split(A)
    assert PA.comps == ({(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): b})
    assert R.comps == ({(0, 1): a}, {(3, 0): c})
    PA2, R2 = nform.sr_split(PA)
    assert PA2.comps == PA.comps and not any(R2.comps)


def test_sr_split_fully_subresonant():
    A = jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 1}])
    PA, R = nform.sr_split(A)
    assert PA.comps == A.comps and not any(R.comps)


def test_resonance_degree():
    # smallest D with D * w_min > spread + margin
    assert nform.resonance_degree([1, 2]) == 3
    assert nform.resonance_degree([1, 1], margin=0.5) == 2


# -- fixed-point normal form ----------------------------------------------------------------------

def test_fixed_point_example():
    res = nform.normal_form_fixed_point(A_example(), W12, 4)
    assert res.N.comps == ({(1, 0): 1}, {(0, 1): 1, (3, 0): -8})
    assert res.PA.comps == ({(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 1})
    # N^{-1} A N is the subresonant part
    A = A_example()
    conj = nform.jet_compose(nform.jet_invert(res.N), nform.jet_compose(A, res.N))
    assert conj.comps == res.PA.comps


def test_fixed_point_trivial_cases():
    L = jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4)}])
    res = nform.normal_form_fixed_point(L)
    assert res.N.comps == Jet.identity(2, 4).comps and res.iterations == 0
    S = jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 3}])
    res = nform.normal_form_fixed_point(S)
    assert res.N.comps == Jet.identity(2, 4).comps and res.iterations == 0


def test_fixed_point_float_mode():
    res = nform.normal_form_fixed_point(A_example().to_float(), W12, 4)
    assert abs(res.N.comps[1][(3, 0)] + 8) < 1e-12


def test_resonant_slot_declared_super_resonant_raises():
    # with weights (1, 1) the x^2 term is flagged super-resonant, but 1/4 = (1/2)^2
    A = jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 1}], weights=(1, 1))
    with pytest.raises(SmallDivisor) as info:
        nform.normal_form_fixed_point(A)
    assert info.value.slot == (1, (2, 0))


@given(st.fractions(min_value=-4, max_value=4, max_denominator=4), st.fractions(min_value=-4, max_value=4, max_denominator=4))
def test_fixed_point_kills_all_super_resonant_terms(b, c):
    A = jet([{(1, 0): F(1, 2), (2, 0): c}, {(0, 1): F(1, 4), (2, 0): b, (3, 0): c, (1, 1): b}])
    res = nform.normal_form_fixed_point(A)
    conj = nform.jet_compose(nform.jet_invert(res.N), nform.jet_compose(A, res.N))
    _, R = nform.sr_split(conj)
    assert not any(R.comps) and conj.comps == res.PA.comps


# -- orbit iteration ------------------------------------------------------------------------------------

def test_orbit_matches_fixed_point():
    A = A_example()
    fp = nform.normal_form_fixed_point(A, W12, 4)
    orb = nform.normal_form_orbit([A.to_float()] * 60, W12, 4)
    assert orb.verdict == "converged"
    inv = nform.jet_invert(orb.N)
    err = max(abs(float(c) - float(fp.N.comps[i].get(e, 0))) for i, comp in enumerate(inv.comps) for e, c in comp.items())
    assert err < 1e-9
    # super-resonant excess of x^3 over y is log 2 per step
    assert abs(orb.rate - 0.5) < 0.01


def test_orbit_subresonant_is_identity():
    S = jet([{(1, 0): F(1, 2)}, {(0, 1): F(1, 4), (2, 0): 3}])
    orb = nform.normal_form_orbit([S] * 5)
    assert orb.N.comps == Jet.identity(2, 4).comps
    assert orb.deviations == [0.0] * 5


def test_orbit_divergence_verdict():
    A = A_example().to_float()
    orb = nform.normal_form_orbit([A] * 40, (1, 1), 4)
    assert orb.verdict == "diverged" and orb.rate >= 1


def test_fit_rate():
    assert abs(nform.fit_rate([0.3 ** k for k in range(30)]) - 0.3) < 1e-12
    assert nform.fit_rate([]) == 0.0
    devs = [0.5 ** k for k in range(20)] + [1e-17] * 20
    assert abs(nform.fit_rate(devs, floor=1e-15, tail=False) - 0.5) < 1e-9


# -- holonomy ---------------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def leaf():
    sys_ = cocyc.twisted_cat()
    X, Y = cocyc.stable_leaf_pair(["1/7", "2/9"], 1e-3, 50)
    return cocyc.cocycle_along(sys_, X), cocyc.cocycle_along(sys_, Y)


def test_holonomy_identity_cases(leaf):
    mx, _ = leaf
    assert np.array_equal(nform.holonomy_graded(mx, mx, 50, [1, 1]).H, np.eye(2))
    const = np.repeat(np.diag([2.0, 0.5])[None], 30, axis=0)
    h = nform.holonomy_graded(const, const.copy(), 30)
    assert np.array_equal(h.H, np.eye(2))


def test_holonomy_inverse_and_rate(leaf):
    mx, my = leaf
    hxy = nform.holonomy_graded(mx, my, 50, [1, 1])
    hyx = nform.holonomy_graded(my, mx, 50, [1, 1])
    assert np.abs(hxy.H @ hyx.H - np.eye(2)).max() < 1e-8
    assert hxy.verdict == "converged"
    # the leaf distance shrinks like e^{-lambda}; increments follow it
    assert abs(hxy.ratio - math.exp(-cocyc.CAT_EXPONENT)) < 0.02


def test_holonomy_block_sizes_checked(leaf):
    mx, my = leaf
    with pytest.raises(ValueError):
        nform.holonomy_graded(mx, my, 50, [1])
    with pytest.raises(ValueError):
        nform.holonomy_graded(mx, my, 80, [1, 1])
