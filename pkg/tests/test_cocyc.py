import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subres import cocyc, sralg
from subres.errors import NumericalFailure, UnresolvedFlag
from subres.rng import SplitMix64

TRI = np.array([[2.0, 1.0], [0.0, 0.5]])


def poly_system(text, names=("x", "y")):
    V = sralg.WeightedSpace.from_weights([1] * len(names), names)
    return cocyc.polynomial_system(sralg.PolyMap.from_text(text, V).comps)


# -- systems and traces -------------------------------------------------------------

def test_system_validation():
    with pytest.raises(ValueError):
        cocyc.SystemDef("toral", 2, ((2, 0), (0, 1)))
    with pytest.raises(ValueError):
        cocyc.SystemDef("flow", 2)


def test_toral_orbit_is_exact():
    tr = cocyc.make_trace(cocyc.cat_map(), ["1/7", "2/9"], 500)
    # rational points with denominator 63 stay on the finite grid
    assert np.allclose(tr.points * 63, np.round(tr.points * 63), atol=1e-9)


def test_trace_csv_roundtrip():
    tr = cocyc.make_trace(cocyc.twisted_cat(), ["1/7", "2/9"], 20, back=5)
    back = cocyc.CocycleTrace.from_csv(tr.to_csv())
    assert back.origin == tr.origin
    assert np.array_equal(back.points, tr.points) and np.array_equal(back.matrices, tr.matrices)


# -- Lyapunov exponents ------------------------------------------------------------

@given(st.floats(-2, 2), st.floats(-2, 2))
def test_diagonal_exponents(a, b):
    tr = cocyc.constant_trace(np.diag([math.exp(a), math.exp(b)]), 50)
    ex = cocyc.lyapunov_qr(tr)
    assert np.allclose(ex, sorted([a, b], reverse=True), atol=1e-12)


def test_cat_exponents():
    tr = cocyc.make_trace(cocyc.cat_map(), ["1/7", "2/9"], 10_000)
    ex = cocyc.lyapunov_qr(tr)
    assert abs(ex[0] - 0.9624236501192069) < 1e-6 and abs(ex[1] + 0.9624236501192069) < 1e-6
    assert abs(cocyc.CAT_EXPONENT - math.log((3 + math.sqrt(5)) / 2)) < 1e-15


def test_triangular_exponents():
    ex = cocyc.lyapunov_qr(cocyc.constant_trace(TRI, 2000))
    assert abs(ex[0] - math.log(2)) < 1e-8 and abs(ex[1] + math.log(2)) < 1e-8


def test_extended_precision_agrees():
    tr = cocyc.make_trace(cocyc.twisted_cat(), ["1/7", "2/9"], 300)
    a = cocyc.lyapunov_qr(tr, precision="double")
    b = cocyc.lyapunov_qr(tr, precision="extended")
    assert np.allclose(a, b, atol=1e-10)


def test_exponent_sum_is_log_det():
    tr = cocyc.make_trace(cocyc.twisted_cat(kappa=0.2), ["1/5", "1/3"], 2000)
    ex = cocyc.lyapunov_qr(tr)
    assert abs(ex.sum() - cocyc.log_det_average(tr)) < 1e-10


def test_singular_step_is_numeric_failure():
    with pytest.raises(NumericalFailure):
        cocyc.lyapunov_qr(cocyc.constant_trace(np.zeros((2, 2)), 10, 0), burn_in=0)


def test_snap_exponents():
    assert cocyc.snap_exponents([0.5000001, -1.0], ["1/2", -1], 1e-5) == [Fraction(1, 2), Fraction(-1)]
    with pytest.raises(NumericalFailure):
        cocyc.snap_exponents([0.6], ["1/2"], 1e-3)


# -- flags -------------------------------------------------------------------------------

def test_diagonal_flags_are_coordinate():
    tr = cocyc.constant_trace(np.diag([3.0, 0.5]), 60, back=60)
    fr = cocyc.oseledets_flags(tr, t=60)
    assert cocyc.subspace_angle(fr.forward[1], np.array([[0.0], [1.0]])) < 1e-12
    assert cocyc.subspace_angle(fr.backward[0], np.array([[1.0], [0.0]])) < 1e-12


def test_triangular_contracting_line():
    fr = cocyc.oseledets_flags(cocyc.constant_trace(TRI, 50), t=50)
    line = np.array([[2.0], [-3.0]]) / math.sqrt(13)
    assert cocyc.subspace_angle(fr.forward[1], line) < 1e-6


def test_cat_flags_match_eigenlines():
    tr = cocyc.make_trace(cocyc.cat_map(), ["1/7", "2/9"], 1000, back=1000)
    fr = cocyc.oseledets_flags(tr, t=1000)
    _, _, vu, vs = cocyc.cat_eigen()
    assert cocyc.subspace_angle(fr.forward[1], vs[:, None]) < 1e-6
    assert cocyc.subspace_angle(fr.backward[0], vu[:, None]) < 1e-6
    assert fr.resolved and len(fr.levels) == 2


def test_unresolved_gap_is_reported():
    tr = cocyc.constant_trace(np.diag([1.001, 1.0]), 100)
    fr = cocyc.oseledets_flags(tr, t=100)
    assert fr.unresolved and len(fr.levels) == 1
    with pytest.raises(UnresolvedFlag):
        cocyc.adapted_norm(tr, 0.01, flags=fr)


# -- adapted norms ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def cat_norm():
    tr = cocyc.make_trace(cocyc.cat_map(), ["1/7", "2/9"], 600)
    return cocyc.adapted_norm(tr, 0.05)


def test_contraction_inequality(cat_norm):
    r = SplitMix64(4)
    V = np.array([[r.normal(), r.normal()] for _ in range(200)])
    res = cocyc.contraction_check(cat_norm, V)
    assert res["violations"] == 0 and res["worst_ratio"] <= 1 + 1e-9


def test_norm_dominates_ambient(cat_norm):
    r = SplitMix64(8)
    for n in range(0, len(cat_norm), 50):
        v = np.array([r.normal(), r.normal()])
        assert cat_norm.norm(n, v) >= np.linalg.norm(v) * (1 - 1e-12)
        assert cat_norm.norm(n, v) <= cat_norm.envelope(n) * np.linalg.norm(v) * (1 + 1e-12)


def test_envelope_slowly_varying(cat_norm):
    logs = [math.log(cat_norm.envelope(n)) for n in range(len(cat_norm))]
    assert cocyc.check_tempered(logs, 0.05).passes


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.3])
def test_closed_form_pure_exponential(eps):
    a = 0.7
    an = cocyc.adapted_norm(cocyc.constant_trace([[math.exp(a)]], 1000), eps)
    n = len(an) - 1
    g = an.grams[-1][0][0, 0]
    assert abs(g - cocyc.geometric_closed_form(eps, n)) < 1e-10
    assert abs(g - 1.0 / (1.0 - math.exp(-2 * eps))) < 1e-10


def test_eps_monotone():
    tr = cocyc.constant_trace([[math.exp(0.4)]], 200)
    g = [cocyc.adapted_norm(tr, e).grams[-1][0][0, 0] for e in (0.01, 0.05, 0.2)]
    assert g[0] > g[1] > g[2]


def test_eps_must_be_below_half_gap():
    tr = cocyc.constant_trace(np.diag([2.0, 0.5]), 200)
    with pytest.raises(ValueError):
        cocyc.adapted_norm(tr, 0.8)


# -- temperedness ---------------------------------------------------------------------

def test_tempered_examples():
    const = cocyc.check_tempered([3.0] * 100, 1e-9)
    assert const.tail_slope == 0 and const.passes
    n = np.arange(1, 100_001)
    assert cocyc.check_tempered(np.log(n), 1e-3).passes
    lin = 0.5 * np.arange(1, 1001)
    assert not cocyc.check_tempered(lin, 0.499).passes
    assert cocyc.check_tempered(lin, 0.5).passes


def test_log_growth_slope_shrinks_with_horizon():
    short = cocyc.check_tempered(np.log(np.arange(1, 101)), 0.1)
    long = cocyc.check_tempered(np.log(np.arange(1, 100_001)), 0.1)
    assert long.tail_slope < short.tail_slope


# -- stable manifolds ---------------------------------------------------------------------

def test_stable_manifold_example():
    sys_ = poly_system("x <- 1/2 * x ; y <- 2 * y + x^2")
    jet = cocyc.local_stable_manifold(sys_, 6, mode="rational")
    assert jet.coeffs == [{(2,): Fraction(-4, 7)}]
    assert jet.residual == 0


def test_stable_manifold_float_mode():
    sys_ = poly_system("x <- 1/2 * x ; y <- 2 * y + x^2")
    jet = cocyc.local_stable_manifold(sys_, 4, mode="float")
    c = {e: v for e, v in jet.coeffs[0].items() if abs(v) > 1e-12}
    assert set(c) == {(2,)} and abs(c[(2,)] + 4 / 7) < 1e-12


def test_linear_system_has_flat_manifold():
    jet = cocyc.local_stable_manifold(poly_system("x <- 1/3 * x ; y <- 3 * y"), 5)
    assert jet.coeffs == [{}]


def test_cat_stable_manifold_is_eigenline():
    jet = cocyc.local_stable_manifold(cocyc.cat_map(), 4, mode="float")
    assert all(abs(c) < 1e-12 for comp in jet.coeffs for c in comp.values())
    _, _, _, vs = cocyc.cat_eigen()
    assert cocyc.subspace_angle(jet.frame[:, :1], vs[:, None]) < 1e-12


@given(st.fractions(min_value=Fraction(-3), max_value=3, max_denominator=5))
def test_stable_manifold_invariance(c):
    # f(x, y) = (x/3, 3y + c x^2 + x^3): check invariance of the graph exactly to degree 5
    sys_ = cocyc.polynomial_system([{(1, 0): Fraction(1, 3)}, {(0, 1): 3, (2, 0): c, (3, 0): 1}])
    jet = cocyc.local_stable_manifold(sys_, 5)
    assert jet.residual == 0


def test_coupled_linear_part_needs_float_mode():
    sys_ = poly_system("x <- 1/2 * x + y ; y <- 2 * y")
    with pytest.raises(NumericalFailure):
        cocyc.local_stable_manifold(sys_, 3, mode="rational")


# -- leaf pairs --------------------------------------------------------------------------------

def test_leaf_pair_converges():
    X, Y = cocyc.stable_leaf_pair(["1/7", "2/9"], 0.01, 30)
    d = np.abs(((X - Y) + 0.5) % 1.0 - 0.5).max(axis=1)
    assert d[-1] < 1e-12 and d[0] > 1e-3
