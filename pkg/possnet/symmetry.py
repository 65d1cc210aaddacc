"""
Relabeling groups (observer automorphisms x outcome permutations) and orbits.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import permutations, product
from typing import Optional, TypeVar

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import DiGraphMatcher

from .config import CARDINALITY_CAPS, ENUMERATION_CAP_BITS
from .errors import PatternError
from .scenario import Distribution, Pattern, Scenario, builtin_scenario

log = logging.getLogger(__name__)

V = TypeVar("V", Pattern, Distribution)


@dataclass(frozen=True)
class Relabeling:
    """Observer j moves to position `observers[j]`; its outcome o becomes `outcomes[j][o]`."""

    observers: tuple[int, ...]
    outcomes: tuple[tuple[int, ...], ...]

    def index_map(self, scenario: Scenario) -> np.ndarray:
        """perm[i] = joint index that joint index i is sent to."""
        if len(self.observers) != len(scenario.observers):
            raise PatternError("relabeling does not match the scenario's observers")
        table = scenario.outcome_table
        moved = np.empty_like(table)
        for j, target in enumerate(self.observers):
            if scenario.outcomes[target] != scenario.outcomes[j]:
                raise PatternError("relabeling mixes observers with different outcome counts")
            moved[:, target] = np.asarray(self.outcomes[j])[table[:, j]]
        return np.ravel_multi_index(tuple(moved.T), scenario.outcomes)


def identity(scenario: Scenario) -> Relabeling:
    return Relabeling(
        tuple(range(len(scenario.observers))),
        tuple(tuple(range(n)) for n in scenario.outcomes),
    )


def compose(g: Relabeling, h: Relabeling) -> Relabeling:
    """The relabeling that applies h first, then g."""
    observers = tuple(g.observers[t] for t in h.observers)
    outcomes = tuple(
        tuple(g.outcomes[h.observers[j]][o] for o in h.outcomes[j])
        for j in range(len(h.observers))
    )
    return Relabeling(observers, outcomes)


def inverse(g: Relabeling) -> Relabeling:
    back = [0] * len(g.observers)
    for j, target in enumerate(g.observers):
        back[target] = j
    outcomes = []
    for k in range(len(g.observers)):
        forward = g.outcomes[back[k]]
        undo = [0] * len(forward)
        for o, image in enumerate(forward):
            undo[image] = o
        outcomes.append(tuple(undo))
    return Relabeling(tuple(back), tuple(outcomes))


# --- Groups ---

def scenario_graph(scenario: Scenario) -> nx.DiGraph:
    graph = nx.DiGraph()
    for i, name in enumerate(scenario.sources):
        graph.add_node(("s", i), kind="source", label=name)
    for j, name in enumerate(scenario.observers):
        graph.add_node(("o", j), kind="observer", label=name, outcomes=scenario.outcomes[j])
    graph.add_edges_from((("s", s), ("o", o)) for s, o in scenario.edges)
    return graph


def _same_role(a: dict, b: dict) -> bool:
    return a["kind"] == b["kind"] and a.get("outcomes") == b.get("outcomes")


def observer_automorphisms(scenario: Scenario) -> list[tuple[int, ...]]:
    """Observer permutations that extend to an automorphism of the source/observer graph."""
    graph = scenario_graph(scenario)
    matcher = DiGraphMatcher(graph, graph, node_match=_same_role)
    found = {
        tuple(mapping[("o", j)][1] for j in range(len(scenario.observers)))
        for mapping in matcher.isomorphisms_iter()
    }
    return sorted(found)


def cardinality_cap(scenario: Scenario) -> Optional[int]:
    """Alphabet cap of the capped network this scenario is isomorphic to, if any."""
    graph = scenario_graph(scenario)
    for name, cap in CARDINALITY_CAPS.items():
        known = scenario_graph(builtin_scenario(name))
        if nx.is_isomorphic(graph, known, node_match=_same_role):
            return cap
    return None


@dataclass(frozen=True)
class RelabelingGroup:
    scenario: Scenario
    elements: tuple[Relabeling, ...]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @cached_property
    def index_maps(self) -> np.ndarray:
        """Shape (|G|, N): one joint-index permutation per element."""
        return np.stack([g.index_map(self.scenario) for g in self.elements])

    @cached_property
    def observer_maps(self) -> np.ndarray:
        """Index permutations of the pure observer automorphisms."""
        plain = [
            g for g in self.elements
            if all(o == tuple(range(len(o))) for o in g.outcomes)
        ]
        return np.stack([g.index_map(self.scenario) for g in plain])


# Groups are built once per scenario
_GROUPS: dict[Scenario, RelabelingGroup] = {}


def relabeling_group(scenario: Scenario) -> RelabelingGroup:
    if scenario not in _GROUPS:
        autos = observer_automorphisms(scenario)
        outcome_perms = [list(permutations(range(n))) for n in scenario.outcomes]
        elements = tuple(
            Relabeling(sigma, pis)
            for sigma in autos
            for pis in product(*outcome_perms)
        )
        _GROUPS[scenario] = RelabelingGroup(scenario, elements)
        log.debug("relabeling group of %s has %d elements", scenario.name, len(elements))
    return _GROUPS[scenario]


# --- Action and orbits ---

def act(g: Relabeling, vector: V) -> V:
    perm = g.index_map(vector.scenario)
    if isinstance(vector, Pattern):
        bits = np.zeros(vector.scenario.size, dtype=bool)
        bits[perm] = vector.bits
        return Pattern.from_bits(vector.scenario, bits)
    values = [None] * vector.scenario.size
    for i, target in enumerate(perm):
        values[target] = vector.values[i]
    return Distribution(vector.scenario, tuple(values))


def _image_codes(codes: np.ndarray, perm: np.ndarray, width: int) -> np.ndarray:
    """Apply a joint-index permutation to pattern codes (MSB = joint index 0)."""
    out = np.zeros_like(codes)
    for i in range(width):
        bit = (codes >> (width - 1 - i)) & 1
        out |= bit << (width - 1 - int(perm[i]))
    return out


@dataclass(frozen=True)
class Orbit:
    representative: Pattern
    size: int
    members: Optional[tuple[int, ...]] = None  # pattern codes, ascending

    @property
    def bitstring(self) -> str:
        return self.representative.bitstring


def orbit_of(pattern: Pattern) -> Orbit:
    group = relabeling_group(pattern.scenario)
    codes = np.array([pattern.code], dtype=np.int64)
    images = {
        int(_image_codes(codes, perm, pattern.scenario.size)[0])
        for perm in group.index_maps
    }
    members = tuple(sorted(images))
    return Orbit(Pattern(pattern.scenario, members[0]), len(members), members)


def canonical(pattern: Pattern) -> Pattern:
    """Lexicographically smallest member of the pattern's orbit."""
    return orbit_of(pattern).representative


def stabilizer_size(pattern: Pattern) -> int:
    return len(relabeling_group(pattern.scenario)) // orbit_of(pattern).size


def partition_into_orbits(scenario: Scenario, symmetric_only: bool = False) -> list[Orbit]:
    """Orbits of all normalized patterns, sorted by representative.

    With `symmetric_only`, keep the orbits that contain a pattern fixed by every
    observer automorphism.
    """
    width = scenario.size
    if width > ENUMERATION_CAP_BITS:
        raise PatternError(f"{scenario.name}: {width} joint outcomes exceeds the enumeration cap")
    group = relabeling_group(scenario)
    codes = np.arange(1, 1 << width, dtype=np.int64)
    canon = codes.copy()
    for perm in group.index_maps:
        np.minimum(canon, _image_codes(codes, perm, width), out=canon)
    reps, sizes = np.unique(canon, return_counts=True)

    if symmetric_only:
        fixed = np.ones(codes.shape, dtype=bool)
        for perm in group.observer_maps:
            fixed &= _image_codes(codes, perm, width) == codes
        keep = set(np.unique(canon[fixed]).tolist())
        pairs = [(r, s) for r, s in zip(reps, sizes) if int(r) in keep]
    else:
        pairs = list(zip(reps, sizes))

    orbits = [Orbit(Pattern(scenario, int(r)), int(s)) for r, s in pairs]
    log.info("%s: %d patterns in %d orbits", scenario.name, len(codes), len(orbits))
    return orbits
