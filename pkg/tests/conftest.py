from fractions import Fraction

import hypothesis.strategies as st
import pytest
from hypothesis import HealthCheck, settings

from subres import sralg
from subres.rng import SplitMix64

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PROFILES = [(1,), (2, 1), (3, 2, 1), (3, 2, 2, 1)]


@st.composite
def weight_profiles(draw, max_dim=4):
    n = draw(st.integers(1, max_dim))
    ws = draw(st.lists(st.fractions(min_value=Fraction(1, 2), max_value=3, max_denominator=3),
                       min_size=n, max_size=n))
    ws = [w for w in ws if w > 0] or [Fraction(1)]
    return tuple(sorted(ws, reverse=True))


spaces = st.sampled_from(PROFILES).map(sralg.WeightedSpace.from_weights)
seeds = st.integers(0, 2**64 - 1)


@pytest.fixture
def rng():
    return SplitMix64(12345)


@pytest.fixture
def V321():
    return sralg.WeightedSpace.from_weights([3, 2, 1])


@pytest.fixture
def V21():
    return sralg.WeightedSpace.from_weights([2, 1])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
