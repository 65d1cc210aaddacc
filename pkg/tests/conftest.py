from fractions import Fraction

import pytest
import hypothesis.strategies as st

from possnet.fixtures import ghz_pattern, triangle_fixtures
from possnet.scenario import Distribution, square, triangle


@pytest.fixture(scope="session")
def tri():
    return triangle()


@pytest.fixture(scope="session")
def sq():
    return square()


@pytest.fixture(scope="session")
def patterns():
    return triangle_fixtures()


@pytest.fixture(scope="session")
def ghz(tri):
    return ghz_pattern(tri)


weights = st.integers(min_value=1, max_value=20)


@st.composite
def triangle_distributions(draw, full_support=False):
    """Exact distributions over the triangle with small integer weights."""
    low = 1 if full_support else 0
    raw = draw(st.lists(st.integers(min_value=low, max_value=9), min_size=8, max_size=8))
    if sum(raw) == 0:
        raw[draw(st.integers(min_value=0, max_value=7))] = 1
    total = sum(raw)
    return Distribution(triangle(), tuple(Fraction(w, total) for w in raw))


@st.composite
def product_distributions(draw):
    """P_A x P_B x P_C: independent observers, always local."""
    marginals = []
    for _ in range(3):
        a, b = draw(weights), draw(weights)
        marginals.append((Fraction(a, a + b), Fraction(b, a + b)))
    scenario = triangle()
    values = []
    for index in range(scenario.size):
        a, b, c = scenario.outcome_tuple(index)
        values.append(marginals[0][a] * marginals[1][b] * marginals[2][c])
    return Distribution(scenario, tuple(values))
