"""
Named patterns, distribution families and known inequalities.
"""

from fractions import Fraction
from functools import lru_cache
from typing import Union

from .certificates import PolynomialInequality, parse_inequality
from .errors import DistributionError, PatternError
from .models import GhzFamilyPoint, WFamilyPoint
from .scenario import Distribution, Pattern, Scenario, square, triangle

TRIANGLE_PATTERNS = {
    "P_all": "[000]+[001]+[010]+[011]+[100]+[101]+[110]+[111]",
    "P_111": "[111]",
    "P1": "[000]+[001]+[010]+[100]",
    "P2": "[011]+[100]",
    "P3": "[011]+[100]+[111]",
    "P4": "[011]+[100]+[110]+[111]",
    "P5": "[001]+[010]+[100]",
}

TRIANGLE_INEQUALITIES = {
    "cut": "P_AB(01) + P_BC(01) - P_A(0) P_C(1) >= 0",
    "I2": "P_AC(11) P_A(0) + P_BC(10) P_B(0) - P_AB(01) P_AB(10) >= 0",
    "I3": "P_AC(00) P_AC(11) + P_BC(00) P_BC(10) + P_BC(01) P_B(1) - P_AB(01) P_AB(10) >= 0",
    "I4": "P_AC(00) P_A(1) + P_BC(01) P_B(1) - P_AB(01) P_AB(10) >= 0",
    "I5": "P_ABC(000) + P_AB(11) P_C(1) + P_AC(11) P_B(1) + P_BC(11) P_A(1) - P_A(1) P_B(1) P_C(1) >= 0",
}


def triangle_fixtures() -> dict[str, Pattern]:
    scenario = triangle()
    return {name: Pattern.from_literal(scenario, text) for name, text in TRIANGLE_PATTERNS.items()}


@lru_cache(maxsize=None)
def triangle_inequalities() -> dict[str, PolynomialInequality]:
    scenario = triangle()
    return {name: parse_inequality(scenario, text) for name, text in TRIANGLE_INEQUALITIES.items()}


def ghz_pattern(scenario: Scenario) -> Pattern:
    """All observers agree: [0...0] + [1...1]."""
    if any(n < 2 for n in scenario.outcomes):
        raise PatternError(f"{scenario.name}: GHZ needs binary outcomes everywhere")
    n = len(scenario.observers)
    return Pattern.from_support(scenario, [(0,) * n, (1,) * n])


# Square outcomes are ordered (a, b, c, d) = (a, b, y, x): C hands Bob's setting
# to the output, D hands Alice's.

def hardy_square_pattern() -> Pattern:
    zeros = {(1, 0, 0, 1), (0, 1, 1, 0), (0, 0, 1, 1)}
    scenario = square()
    events = [scenario.outcome_tuple(i) for i in range(scenario.size)]
    return Pattern.from_support(scenario, [e for e in events if e not in zeros])


def pr_box_square_pattern() -> Pattern:
    scenario = square()
    events = [scenario.outcome_tuple(i) for i in range(scenario.size)]
    return Pattern.from_support(scenario, [(a, b, y, x) for a, b, y, x in events if a ^ b == x * y])


def ghz_family(point: GhzFamilyPoint) -> Distribution:
    scenario = triangle()
    values = [Fraction(0)] * scenario.size
    values[0] = point.x
    values[-1] = 1 - point.x
    return Distribution(scenario, tuple(values))


def w_family(point: WFamilyPoint) -> Distribution:
    """v * (mu [001] + nu [010] + (1 - mu - nu) [100]) + (1 - v) / 8."""
    scenario = triangle()
    noise = (1 - point.v) / scenario.size
    values = [noise] * scenario.size
    for event, weight in (((0, 0, 1), point.mu), ((0, 1, 0), point.nu), ((1, 0, 0), 1 - point.mu - point.nu)):
        values[scenario.joint_index(event)] += point.v * weight
    return Distribution(scenario, tuple(values))


# --- Name resolution ---

def _params(text: str) -> dict[str, Fraction]:
    params = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise DistributionError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = Fraction(value.strip())
        except ValueError:
            raise DistributionError(f"bad number {value!r} for {key.strip()}") from None
    return params


def resolve_fixture(name: str) -> Union[Pattern, Distribution]:
    """Fixture by CLI name: "ghz:x=1/2", "w:mu=1/3,nu=1/3,v=9/10", "hardy-square", "pr-square", "triangle:P5"."""
    kind, _, rest = name.strip().partition(":")
    if kind == "hardy-square" and not rest:
        return hardy_square_pattern()
    if kind == "pr-square" and not rest:
        return pr_box_square_pattern()
    if kind == "triangle":
        patterns = triangle_fixtures()
        if rest not in patterns:
            raise PatternError(f"unknown triangle pattern {rest!r}; known: {', '.join(patterns)}")
        return patterns[rest]
    if kind == "ghz":
        params = _params(rest)
        if set(params) != {"x"}:
            raise DistributionError("ghz fixture takes exactly x")
        return ghz_family(GhzFamilyPoint(params["x"]))
    if kind == "w":
        params = _params(rest)
        if not {"mu", "nu"} <= set(params) <= {"mu", "nu", "v"}:
            raise DistributionError("w fixture takes mu, nu and optionally v")
        return w_family(WFamilyPoint(**params))
    raise PatternError(f"unknown fixture {name!r}")
