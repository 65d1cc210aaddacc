"""
Scenarios, distributions, patterns and their marginals.

Joint outcomes are indexed with the last observer's outcome incrementing
fastest. Patterns live in the two-element possibility semiring, stored as
numpy bool arrays (True = possible, False = impossible).
"""

import json
import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .config import ENUMERATION_CAP_BITS
from .errors import DistributionError, PatternError, ScenarioError

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class Scenario:
    name: str
    sources: tuple[str, ...]
    observers: tuple[str, ...]
    outcomes: tuple[int, ...]
    edges: frozenset[tuple[int, int]]  # (source index, observer index)

    @property
    def size(self) -> int:
        """Number of joint outcomes."""
        return math.prod(self.outcomes)

    def parents(self, observer: int) -> tuple[int, ...]:
        return tuple(sorted(s for s, o in self.edges if o == observer))

    def children(self, source: int) -> tuple[int, ...]:
        return tuple(sorted(o for s, o in self.edges if s == source))

    def observer_index(self, name: Union[str, int]) -> int:
        if isinstance(name, int):
            if not 0 <= name < len(self.observers):
                raise ScenarioError(f"no observer with index {name}")
            return name
        try:
            return self.observers.index(name)
        except ValueError:
            raise ScenarioError(f"unknown observer {name!r}") from None

    def joint_index(self, outcomes: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(outcomes), self.outcomes))

    def outcome_tuple(self, index: int) -> tuple[int, ...]:
        return tuple(int(o) for o in np.unravel_index(index, self.outcomes))

    @cached_property
    def outcome_table(self) -> np.ndarray:
        """Row i holds the outcome tuple of joint index i."""
        grid = np.indices(self.outcomes).reshape(len(self.outcomes), -1)
        return grid.T.copy()

    def share_source(self, first: int, second: int) -> bool:
        return bool(set(self.parents(first)) & set(self.parents(second)))

    def to_description(self) -> dict:
        return {
            "name": self.name,
            "sources": list(self.sources),
            "observers": dict(zip(self.observers, self.outcomes)),
            "edges": [
                [self.sources[s], self.observers[o]] for s, o in sorted(self.edges)
            ],
        }


# --- Scenario loading ---

def validate_scenario(raw: Mapping) -> Scenario:
    """Build a Scenario from its JSON-style description, or raise ScenarioError."""
    name = str(raw.get("name", "scenario"))
    sources = [str(s) for s in raw.get("sources", [])]
    if len(set(sources)) != len(sources):
        raise ScenarioError("duplicate source name")

    raw_observers = raw.get("observers", {})
    if isinstance(raw_observers, Mapping):
        observer_items = [(str(k), v) for k, v in raw_observers.items()]
    else:
        observer_items = [(str(o["name"]), o["outcomes"]) for o in raw_observers]
    if not observer_items:
        raise ScenarioError("scenario has no observers")
    observers = [n for n, _ in observer_items]
    if len(set(observers)) != len(observers):
        raise ScenarioError("duplicate observer name")

    outcomes = []
    for obs, count in observer_items:
        if not isinstance(count, int) or count < 2:
            raise ScenarioError(f"observer {obs} needs at least 2 outcomes, got {count!r}")
        outcomes.append(count)

    edges: set[tuple[int, int]] = set()
    for pair in raw.get("edges", []):
        src, obs = pair
        if src not in sources:
            raise ScenarioError(f"edge references unknown source {src!r}")
        if obs not in observers:
            raise ScenarioError(f"edge references unknown observer {obs!r}")
        edge = (sources.index(src), observers.index(obs))
        if edge in edges:
            raise ScenarioError(f"duplicate edge {src}->{obs}")
        edges.add(edge)

    fed = {o for _, o in edges}
    for j, obs in enumerate(observers):
        if j not in fed:
            raise ScenarioError(f"orphan observer {obs}: no incident source")

    return Scenario(
        name=name,
        sources=tuple(sources),
        observers=tuple(observers),
        outcomes=tuple(outcomes),
        edges=frozenset(edges),
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return validate_scenario(json.load(fh))


# Built-in scenarios (loaded once)
_BUILTINS: dict[str, Scenario] = {}


def builtin_scenario(name: str) -> Scenario:
    if name not in _BUILTINS:
        path = DATA_DIR / f"{name}.json"
        if not path.exists():
            raise ScenarioError(f"no built-in scenario named {name!r}")
        _BUILTINS[name] = load_scenario(path)
    return _BUILTINS[name]


def triangle() -> Scenario:
    return builtin_scenario("triangle")


def square() -> Scenario:
    return builtin_scenario("square")


def resolve_scenario(name_or_path: str) -> Scenario:
    """Built-in name first, then a JSON file path."""
    if (DATA_DIR / f"{name_or_path}.json").exists():
        return builtin_scenario(name_or_path)
    if Path(name_or_path).is_file():
        return load_scenario(name_or_path)
    raise ScenarioError(f"unknown scenario {name_or_path!r}")


# --- Text helpers ---

def _outcome_text(outcomes: Sequence[int]) -> str:
    if all(o < 10 for o in outcomes):
        return "".join(str(o) for o in outcomes)
    return ",".join(str(o) for o in outcomes)


def probability_label(names: Sequence[str], outcomes: Sequence[int]) -> str:
    """Render a marginal probability such as P_AC(01) or P_{A1 C1}(01)."""
    if all(len(n) == 1 for n in names):
        party = "".join(names)
    else:
        party = "{" + " ".join(names) + "}"
    return f"P_{party}({_outcome_text(outcomes)})"


def _parse_outcomes(text: str, width: int) -> tuple[int, ...]:
    values = text.split(",") if "," in text else list(text)
    if len(values) != width:
        raise PatternError(f"expected {width} outcomes in {text!r}")
    return tuple(int(v) for v in values)


# --- Patterns and distributions ---

@dataclass(frozen=True)
class Pattern:
    """Possibility vector over joint outcomes; bit N-1-i of `code` is joint index i."""

    scenario: Scenario
    code: int

    def __post_init__(self):
        if not 0 <= self.code < (1 << self.scenario.size):
            raise PatternError(f"pattern code {self.code} out of range")

    @classmethod
    def from_bits(cls, scenario: Scenario, bits: Sequence[bool]) -> "Pattern":
        bits = np.asarray(bits, dtype=bool).reshape(-1)
        if bits.size != scenario.size:
            raise PatternError(f"expected {scenario.size} entries, got {bits.size}")
        text = "".join("1" if b else "0" for b in bits)
        return cls(scenario, int(text, 2))

    @classmethod
    def from_bitstring(cls, scenario: Scenario, text: str) -> "Pattern":
        text = text.strip()
        if len(text) != scenario.size or set(text) - {"0", "1"}:
            raise PatternError(f"bad bitstring {text!r} for {scenario.name}")
        return cls(scenario, int(text, 2))

    @classmethod
    def from_support(cls, scenario: Scenario, events: Sequence[Sequence[int]]) -> "Pattern":
        bits = np.zeros(scenario.size, dtype=bool)
        for event in events:
            if len(event) != len(scenario.observers):
                raise PatternError(f"event {tuple(event)} has the wrong length")
            for o, n in zip(event, scenario.outcomes):
                if not 0 <= o < n:
                    raise PatternError(f"event {tuple(event)} out of range")
            bits[scenario.joint_index(event)] = True
        return cls.from_bits(scenario, bits)

    @classmethod
    def from_literal(cls, scenario: Scenario, literal: str) -> "Pattern":
        """Parse "[000]+[111]"; the empty literal "0" is the all-impossible pattern."""
        literal = literal.strip()
        if literal in ("", "0"):
            return cls(scenario, 0)
        terms = re.findall(r"\[([^\]]*)\]", literal)
        leftover = re.sub(r"\[[^\]]*\]|\+|\s", "", literal)
        if not terms or leftover:
            raise PatternError(f"cannot parse pattern literal {literal!r}")
        width = len(scenario.observers)
        return cls.from_support(scenario, [_parse_outcomes(t, width) for t in terms])

    @cached_property
    def bits(self) -> np.ndarray:
        text = format(self.code, f"0{self.scenario.size}b")
        return np.frombuffer(text.encode("ascii"), dtype=np.uint8) == ord("1")

    @property
    def tensor(self) -> np.ndarray:
        return self.bits.reshape(self.scenario.outcomes)

    @property
    def bitstring(self) -> str:
        return format(self.code, f"0{self.scenario.size}b")

    @property
    def is_normalized(self) -> bool:
        return self.code != 0

    @property
    def support_size(self) -> int:
        return bin(self.code).count("1")

    def support(self) -> list[tuple[int, ...]]:
        return [self.scenario.outcome_tuple(int(i)) for i in np.flatnonzero(self.bits)]

    @property
    def literal(self) -> str:
        events = self.support()
        if not events:
            return "0"
        return "+".join(f"[{_outcome_text(e)}]" for e in events)

    def __str__(self) -> str:
        return self.literal


@dataclass(frozen=True)
class Distribution:
    scenario: Scenario
    values: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.values) != self.scenario.size:
            raise DistributionError(
                f"expected {self.scenario.size} probabilities, got {len(self.values)}"
            )
        if any(v < 0 for v in self.values):
            raise DistributionError("negative probability")
        if sum(self.values) != 1:
            raise DistributionError(f"probabilities sum to {sum(self.values)}, not 1")

    @classmethod
    def from_values(cls, scenario: Scenario, values: Sequence) -> "Distribution":
        return cls(scenario, tuple(_to_fraction(v) for v in values))

    @classmethod
    def uniform(cls, scenario: Scenario) -> "Distribution":
        return cls(scenario, (Fraction(1, scenario.size),) * scenario.size)

    @property
    def array(self) -> np.ndarray:
        arr = np.empty(len(self.values), dtype=object)
        arr[:] = self.values
        return arr

    @property
    def tensor(self) -> np.ndarray:
        return self.array.reshape(self.scenario.outcomes)

    def __getitem__(self, outcomes: Sequence[int]) -> Fraction:
        return self.values[self.scenario.joint_index(outcomes)]


def _to_fraction(value) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


Vector = Union[Pattern, Distribution]


# --- Marginals ---

def observer_subset(scenario: Scenario, observers: Sequence[Union[int, str]]) -> tuple[int, ...]:
    """Resolve names/indices to a sorted tuple of observer indices."""
    if len(observers) == 0:
        raise ScenarioError("marginal over an empty set of observers")
    keep = sorted({scenario.observer_index(o) for o in observers})
    return tuple(keep)


def marginal_tensor(vector: Vector, observers: Sequence[Union[int, str]]) -> np.ndarray:
    """Marginal as a tensor with one axis per kept observer (scenario order)."""
    scenario = vector.scenario
    keep = observer_subset(scenario, observers)
    drop = tuple(j for j in range(len(scenario.observers)) if j not in keep)
    if isinstance(vector, Pattern):
        return vector.tensor.any(axis=drop)
    if not drop:
        return vector.tensor.copy()
    return vector.tensor.sum(axis=drop)


def marginalize(vector: Vector, observers: Sequence[Union[int, str]]) -> np.ndarray:
    """Flat marginal vector over the kept observers, last observer fastest.

    Patterns are summed possibilistically (logical OR), distributions exactly.
    """
    return marginal_tensor(vector, observers).reshape(-1)


def collapse_scalar(value) -> bool:
    return value > 0


def collapse(distribution: Distribution) -> Pattern:
    bits = [collapse_scalar(v) for v in distribution.values]
    return Pattern.from_bits(distribution.scenario, bits)


def realizations_sample(
    pattern: Pattern,
    weights: Optional[Sequence] = None,
    seed: Optional[int] = None,
) -> Distribution:
    """A distribution whose support is exactly the pattern's possible events.

    `weights` is a full-length vector (zero on impossible events); without it a
    seed draws random positive integer weights, and with neither the result is
    uniform on the support.
    """
    if not pattern.is_normalized:
        raise PatternError("the all-impossible pattern has no realization")
    bits = pattern.bits
    if weights is not None:
        raw = [_to_fraction(w) for w in weights]
        if len(raw) != pattern.scenario.size:
            raise DistributionError("weights must cover every joint outcome")
        for i, (w, possible) in enumerate(zip(raw, bits)):
            if possible and w <= 0:
                raise DistributionError(f"weight on possible event {i} must be positive")
            if not possible and w != 0:
                raise DistributionError(f"weight on impossible event {i} must be zero")
    elif seed is not None:
        rng = np.random.default_rng(seed)
        draws = rng.integers(1, 100, size=int(bits.sum()), endpoint=True)
        raw = [Fraction(0)] * pattern.scenario.size
        for i, d in zip(np.flatnonzero(bits), draws):
            raw[int(i)] = Fraction(int(d))
    else:
        raw = [Fraction(int(b)) for b in bits]
    total = sum(raw)
    return Distribution(pattern.scenario, tuple(w / total for w in raw))


def enumerate_patterns(scenario: Scenario) -> Iterator[Pattern]:
    """All 2**N - 1 normalized patterns in increasing code order."""
    if scenario.size > ENUMERATION_CAP_BITS:
        raise PatternError(
            f"{scenario.name} has {scenario.size} joint outcomes; "
            f"enumeration is capped at {ENUMERATION_CAP_BITS}"
        )
    for code in range(1, 1 << scenario.size):
        yield Pattern(scenario, code)


# --- Valuations and monomials ---

@dataclass(frozen=True)
class Valuation:
    assignment: tuple[tuple[int, int], ...]  # sorted (observer, outcome) pairs

    @classmethod
    def of(cls, assignment: Mapping[int, int]) -> "Valuation":
        if not assignment:
            raise ScenarioError("valuation over no observers")
        return cls(tuple(sorted((int(k), int(v)) for k, v in assignment.items())))

    @property
    def observers(self) -> tuple[int, ...]:
        return tuple(o for o, _ in self.assignment)

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(v for _, v in self.assignment)

    @property
    def key(self) -> tuple:
        return (-len(self.assignment), self.observers, self.outcomes)

    def check(self, scenario: Scenario) -> None:
        for obs, out in self.assignment:
            if not 0 <= obs < len(scenario.observers):
                raise ScenarioError(f"valuation references observer {obs}")
            if not 0 <= out < scenario.outcomes[obs]:
                raise ScenarioError(
                    f"outcome {out} out of range for {scenario.observers[obs]}"
                )

    def label(self, scenario: Scenario) -> str:
        return probability_label([scenario.observers[o] for o in self.observers], self.outcomes)


@dataclass(frozen=True)
class Monomial:
    """Formal product of valuation probabilities, factors kept in normal order."""

    factors: tuple[Valuation, ...]

    def __post_init__(self):
        if not self.factors:
            raise ScenarioError("monomial needs at least one factor")
        ordered = tuple(sorted(self.factors, key=lambda v: v.key))
        object.__setattr__(self, "factors", ordered)

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def key(self) -> tuple:
        return (self.degree, tuple(f.key for f in self.factors))

    def label(self, scenario: Scenario) -> str:
        return " ".join(f.label(scenario) for f in self.factors)


def _valuation_value(vector: Vector, valuation: Valuation):
    valuation.check(vector.scenario)
    table = marginal_tensor(vector, valuation.observers)
    return table[valuation.outcomes]


def evaluate_monomial(vector: Vector, monomial: Monomial):
    """Product of marginal values: a Fraction for distributions, a bool for patterns."""
    if isinstance(vector, Pattern):
        return all(bool(_valuation_value(vector, v)) for v in monomial.factors)
    value = Fraction(1)
    for v in monomial.factors:
        value *= _valuation_value(vector, v)
    return value
