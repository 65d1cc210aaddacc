"""
Possibilistic refutation of inflation constraint systems and the
factorization test for observers that share no source.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np

from .errors import PatternError
from .inflation import Constraint, ConstraintSystem, bits_to_int
from .scenario import Pattern, Scenario, evaluate_monomial, marginal_tensor

if TYPE_CHECKING:
    from .certificates import PolynomialInequality

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Consistent:
    """No contradiction found; `hypothesis` (True = still possible) satisfies every constraint."""

    hypothesis: np.ndarray
    passes: int = 1


@dataclass(frozen=True, eq=False)
class Contradiction:
    system: ConstraintSystem
    violated: Constraint
    covering: tuple[Constraint, ...]  # impossible constraints meeting the violated region
    hypothesis: np.ndarray

    @property
    def antecedent_mask(self) -> int:
        return self.system.mask(self.violated)

    def covers(self) -> bool:
        union = 0
        for c in self.covering:
            union |= self.system.mask(c)
        return self.antecedent_mask & ~union == 0

    def to_dict(self) -> dict:
        return {
            "inflation": self.system.inflation.name,
            "violated": self.system.name(self.violated),
            "covering": [self.system.name(c) for c in self.covering],
        }


def _broadcast_shape(system: ConstraintSystem, members: Sequence[int]) -> tuple[int, ...]:
    outcomes = system.inflation.outcomes
    return tuple(outcomes[t] if t in members else 1 for t in range(len(outcomes)))


def _agrees(first: Constraint, first_members, second: Constraint, second_members) -> bool:
    assigned = dict(zip(first_members, first.outcomes))
    return all(assigned.get(t, o) == o for t, o in zip(second_members, second.outcomes))


def covering_constraints(system: ConstraintSystem, violated: Constraint) -> tuple[Constraint, ...]:
    """Impossible constraints whose region intersects the violated constraint's region."""
    target = system.blocks[violated.block].ai_set.members
    found = []
    for b, block in enumerate(system.blocks):
        members = block.ai_set.members
        for outcomes in np.argwhere(~block.rhs):
            c = Constraint(b, tuple(int(o) for o in outcomes), False)
            if _agrees(violated, target, c, members):
                found.append(c)
    return tuple(found)


def violated_constraints(system: ConstraintSystem, alive: np.ndarray) -> list[Constraint]:
    """Possible constraints none of whose region survives in `alive`."""
    axes = range(len(system.inflation.outcomes))
    found = []
    for b, block in enumerate(system.blocks):
        members = block.ai_set.members
        reachable = alive.any(axis=tuple(a for a in axes if a not in members))
        for outcomes in np.argwhere(block.rhs & ~reachable):
            found.append(Constraint(b, tuple(int(o) for o in outcomes), True))
    return found


def propagate_and_refute(system: ConstraintSystem, fixpoint: bool = False) -> Union[Consistent, Contradiction]:
    """Two-phase refutation.

    Phase 1 marks impossible every inflation event inside an impossible
    constraint region. Phase 2 returns, among the possible constraints whose
    whole region got marked, one with the fewest factors. With `fixpoint`,
    both phases repeat until the hypothesis stops changing; for equality
    constraints against known values the second round never changes anything.
    """
    if not isinstance(system.source, Pattern):
        raise PatternError("possibilistic refutation needs a pattern, not a distribution")
    shape = system.inflation.outcomes
    nope = np.zeros(shape, dtype=bool)
    passes = 0
    while True:
        passes += 1
        before = nope.copy()
        for block in system.blocks:
            zero = ~block.rhs
            if zero.any():
                nope |= zero.reshape(_broadcast_shape(system, block.ai_set.members))

        alive = ~nope
        missing = violated_constraints(system, alive)
        if missing:
            # fewest factors first, then block and outcome order
            violated = min(
                missing,
                key=lambda c: (len(system.blocks[c.block].ai_set.components), c.block, c.outcomes),
            )
            found = Contradiction(
                system, violated, covering_constraints(system, violated), alive.reshape(-1)
            )
            log.debug("%s: contradiction at %s (%d violated)", system.inflation.name,
                      system.name(violated), len(missing))
            return found

        if not fixpoint or np.array_equal(before, nope):
            return Consistent(alive.reshape(-1), passes)


def hypothesis_mask(result: Union[Consistent, Contradiction]) -> int:
    return bits_to_int(result.hypothesis)


# --- Factorization ---

@dataclass(frozen=True)
class FactorizationResult:
    passed: bool
    pair: Optional[tuple[int, int]] = None
    outcomes: Optional[tuple[int, int]] = None


def independent_pairs(scenario: Scenario) -> list[tuple[int, int]]:
    """Observer pairs with no common source."""
    n = len(scenario.observers)
    return [(x, y) for x in range(n) for y in range(x + 1, n) if not scenario.share_source(x, y)]


def check_factorization(pattern: Pattern, pairs: Optional[Sequence[tuple[int, int]]] = None) -> FactorizationResult:
    """P_XY(xy) must equal P_X(x) P_Y(y) for observers sharing no source."""
    scenario = pattern.scenario
    if pairs is None:
        pairs = independent_pairs(scenario)
    for pair in pairs:
        x, y = sorted(scenario.observer_index(o) for o in pair)
        if scenario.share_source(x, y):
            raise PatternError(
                f"{scenario.observers[x]} and {scenario.observers[y]} share a source"
            )
        joint = marginal_tensor(pattern, (x, y))
        product = np.logical_and.outer(marginal_tensor(pattern, (x,)), marginal_tensor(pattern, (y,)))
        wrong = np.argwhere(joint != product)
        if len(wrong):
            a, b = (int(v) for v in wrong[0])
            return FactorizationResult(False, (x, y), (a, b))
    return FactorizationResult(True)


def evaluate_possibilistic(inequality: "PolynomialInequality", pattern: Pattern) -> bool:
    """Whether the inequality holds in the possibility semiring.

    It fails when some negative term is possible while every positive term is
    impossible.
    """
    positive = any(evaluate_monomial(pattern, m) for c, m in inequality.terms if c > 0)
    negative = any(evaluate_monomial(pattern, m) for c, m in inequality.terms if c < 0)
    return positive or not negative
