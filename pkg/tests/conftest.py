import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from unionspec.geometry import IntervalUnion

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

DERIVED_B = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]) / 2


@pytest.fixture
def unit():
    return IntervalUnion([0, 1])


@pytest.fixture
def two():
    return IntervalUnion([0, Fraction(1, 2), 1, Fraction(3, 2)])


@pytest.fixture
def derived_b():
    return DERIVED_B.copy()


@st.composite
def rational_unions(draw, max_n=4, den=8):
    """Random unions of n intervals with endpoints on (1/den) Z."""
    n = draw(st.integers(1, max_n))
    gaps = draw(st.lists(st.integers(0, 2 * den), min_size=n, max_size=n))
    lens = draw(st.lists(st.integers(1, 2 * den), min_size=n, max_size=n))
    start = draw(st.integers(-2 * den, 2 * den))
    pts, x = [], Fraction(start, den)
    for i, (g, l) in enumerate(zip(gaps, lens)):
        if i:
            x += Fraction(g + 1, den)
        pts += [x, x + Fraction(l, den)]
        x = pts[-1]
    return IntervalUnion(pts)


@st.composite
def unitaries(draw, n):
    seed = draw(st.integers(0, 2**32 - 1))
    from oracles import haar_unitary

    return haar_unitary(np.random.default_rng(seed), n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
