"""
Inflations of a scenario: construction, wiring rules, AI-expressible observer
sets and the marginal constraint systems they induce.
"""

import json
import logging
import math
import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, product
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import DiGraphMatcher

from .config import INFLATION_MAX_JOINT_BITS
from .errors import InflationError
from .scenario import (
    Distribution,
    Monomial,
    Pattern,
    Scenario,
    Valuation,
    Vector,
    marginal_tensor,
    probability_label,
)

log = logging.getLogger(__name__)

CopyLabel = tuple[int, ...]


def _copy_name(name: str, label: CopyLabel) -> str:
    if len(label) == 1:
        return f"{name}{label[0]}"
    return f"{name}({','.join(str(k) for k in label)})"


@dataclass(frozen=True)
class Inflation:
    name: str
    base: Scenario
    source_copies: tuple[tuple[int, CopyLabel], ...]    # (base source, copy label)
    observer_copies: tuple[tuple[int, CopyLabel], ...]  # sorted by (base observer, label)
    edges: frozenset[tuple[int, int]]                    # (source copy, observer copy)
    nonsignaling: bool

    def source_name(self, k: int) -> str:
        base, label = self.source_copies[k]
        return _copy_name(self.base.sources[base], label)

    def observer_name(self, t: int) -> str:
        base, label = self.observer_copies[t]
        return _copy_name(self.base.observers[base], label)

    def observer_type(self, t: int) -> int:
        return self.observer_copies[t][0]

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(self.base.outcomes[j] for j, _ in self.observer_copies)

    @property
    def size(self) -> int:
        return math.prod(self.outcomes)

    def feeds(self, t: int) -> tuple[int, ...]:
        return tuple(sorted(k for k, o in self.edges if o == t))

    @cached_property
    def source_map(self) -> tuple[dict[int, int], ...]:
        """Per observer copy: base source -> the source copy feeding it."""
        maps: list[dict[int, int]] = [{} for _ in self.observer_copies]
        for k, t in sorted(self.edges):
            maps[t].setdefault(self.source_copies[k][0], k)
        return tuple(maps)

    @cached_property
    def scenario(self) -> Scenario:
        """The inflation viewed as an ordinary scenario over its copies."""
        return Scenario(
            name=self.name,
            sources=tuple(self.source_name(k) for k in range(len(self.source_copies))),
            observers=tuple(self.observer_name(t) for t in range(len(self.observer_copies))),
            outcomes=self.outcomes,
            edges=self.edges,
        )


# --- Wiring rules ---

@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str


def validate_inflation(inflation: Inflation, nonsignaling: Optional[bool] = None) -> list[Violation]:
    """Check the wiring rules; an empty list means the inflation is valid.

    `nonsignaling` overrides the declared flavor (True enforces no duplication).
    """
    check_duplication = inflation.nonsignaling if nonsignaling is None else nonsignaling
    base = inflation.base
    found: list[Violation] = []

    n_sources, n_observers = len(inflation.source_copies), len(inflation.observer_copies)
    for i, (src, _) in enumerate(inflation.source_copies):
        if not 0 <= src < len(base.sources):
            found.append(Violation("dangling", f"source copy {i} refers to base source {src}"))
    for t, (obs, _) in enumerate(inflation.observer_copies):
        if not 0 <= obs < len(base.observers):
            found.append(Violation("dangling", f"observer copy {t} refers to base observer {obs}"))
    edges = []
    for k, t in sorted(inflation.edges):
        if not (0 <= k < n_sources and 0 <= t < n_observers):
            found.append(Violation("dangling", f"edge ({k}, {t}) references a missing copy"))
        else:
            edges.append((k, t))
    if found:
        return found

    for k, t in edges:
        if (inflation.source_copies[k][0], inflation.observer_copies[t][0]) not in base.edges:
            found.append(Violation(
                "compatible-types",
                f"{inflation.source_name(k)} -> {inflation.observer_name(t)} has no base edge",
            ))

    for t, (obs, _) in enumerate(inflation.observer_copies):
        received = [inflation.source_copies[k][0] for k, o in edges if o == t]
        for src in base.parents(obs):
            count = received.count(src)
            if count == 0:
                found.append(Violation(
                    "complete-sources",
                    f"{inflation.observer_name(t)} receives no copy of {base.sources[src]}",
                ))
            elif count > 1:
                found.append(Violation(
                    "complete-sources",
                    f"{inflation.observer_name(t)} receives {count} copies of {base.sources[src]}",
                ))

    if check_duplication:
        for k in range(n_sources):
            fed = [inflation.observer_copies[t][0] for kk, t in edges if kk == k]
            for obs in sorted(set(fed)):
                if fed.count(obs) > 1:
                    found.append(Violation(
                        "no-duplication",
                        f"{inflation.source_name(k)} feeds {fed.count(obs)} copies of "
                        f"{base.observers[obs]}",
                    ))
    return found


# --- Builders ---

def _assemble(
    name: str,
    base: Scenario,
    sources: list[tuple[int, CopyLabel]],
    wiring: list[tuple[int, CopyLabel, list[int]]],
    nonsignaling: bool,
) -> Inflation:
    """wiring: (base observer, label, source-copy positions) in any order."""
    order = sorted(range(len(wiring)), key=lambda w: (wiring[w][0], wiring[w][1]))
    position = {w: t for t, w in enumerate(order)}
    edges = frozenset(
        (k, position[w]) for w, (_, _, feeds) in enumerate(wiring) for k in feeds
    )
    inflation = Inflation(
        name=name,
        base=base,
        source_copies=tuple(sources),
        observer_copies=tuple((wiring[w][0], wiring[w][1]) for w in order),
        edges=edges,
        nonsignaling=nonsignaling,
    )
    bits = sum(math.log2(n) for n in inflation.outcomes)
    if bits > INFLATION_MAX_JOINT_BITS:
        raise InflationError(
            f"{name} has 2^{bits:.0f} joint outcomes, above the cap 2^{INFLATION_MAX_JOINT_BITS}"
        )
    return inflation


def cycle_order(scenario: Scenario) -> tuple[list[int], list[int]]:
    """Observers around a cycle scenario and the source linking each to the next."""
    for s in range(len(scenario.sources)):
        if len(scenario.children(s)) != 2:
            raise InflationError(f"{scenario.name} is not a cycle: {scenario.sources[s]} "
                                 f"feeds {len(scenario.children(s))} observers")
    for o in range(len(scenario.observers)):
        if len(scenario.parents(o)) != 2:
            raise InflationError(f"{scenario.name} is not a cycle: {scenario.observers[o]} "
                                 f"has {len(scenario.parents(o))} sources")
    order, links = [0], []
    while len(order) < len(scenario.observers):
        current = order[-1]
        steps = sorted(
            (nbr, s)
            for s in scenario.parents(current)
            for nbr in scenario.children(s)
            if nbr not in order
        )
        if not steps:
            raise InflationError(f"{scenario.name} is not a single cycle")
        nbr, s = steps[0]
        links.append(s)
        order.append(nbr)
    closing = (set(scenario.parents(order[-1])) & set(scenario.parents(order[0]))) - set(links)
    if len(closing) != 1:
        raise InflationError(f"{scenario.name} is not a single cycle")
    links.append(closing.pop())
    return order, links


def make_ring(scenario: Scenario, length: int) -> Inflation:
    order, links = cycle_order(scenario)
    m = len(order)
    if length % m or length // m < 2:
        raise InflationError(f"ring length must be a multiple of {m} and at least {2 * m}")
    sources = [(links[p % m], (p // m + 1,)) for p in range(length)]
    wiring = []
    for p in range(length):
        feeds = [p, (p - 1) % length]
        wiring.append((order[p % m], (p // m + 1,), sorted(feeds)))
    return _assemble(f"ring:{length}", scenario, sources, wiring, nonsignaling=True)


def _triangle_order(scenario: Scenario) -> tuple[list[int], list[int]]:
    order, links = cycle_order(scenario)
    if len(order) != 3:
        raise InflationError(f"{scenario.name} is not triangle-shaped")
    return order, links


def make_cut(scenario: Scenario) -> Inflation:
    """One copy of each observer; the source closing the cycle is split in two."""
    order, links = _triangle_order(scenario)
    s0, s1, s2 = links
    sources = [(s0, (1,)), (s1, (1,)), (s2, (1,)), (s2, (2,))]
    wiring = [
        (order[0], (1,), [0, 2]),
        (order[1], (1,), [0, 1]),
        (order[2], (1,), [1, 3]),
    ]
    return _assemble("cut", scenario, sources, wiring, nonsignaling=True)


def make_spiral(scenario: Scenario) -> Inflation:
    """Two copies per observer; copy 2 takes copy 2 of its incoming source."""
    order, links = _triangle_order(scenario)
    sources = [(links[t], (c,)) for c in (1, 2) for t in range(3)]
    index = {(links[t], c): c * 3 - 3 + t for c in (1, 2) for t in range(3)}
    wiring = []
    for t, obs in enumerate(order):
        incoming, outgoing = links[t - 1], links[t]
        wiring.append((obs, (1,), [index[incoming, 1], index[outgoing, 1]]))
        wiring.append((obs, (2,), [index[incoming, 2], index[outgoing, 1]]))
    return _assemble("spiral", scenario, sources, wiring, nonsignaling=False)


def make_web(scenario: Scenario, n: int) -> Inflation:
    """n copies per source and one observer copy per tuple of incident source copies."""
    if n < 1:
        raise InflationError("web inflation needs at least one copy per source")
    sources = [(i, (k,)) for i in range(len(scenario.sources)) for k in range(1, n + 1)]
    index = {(i, k): pos for pos, (i, (k,)) in enumerate(sources)}
    wiring = []
    for j in range(len(scenario.observers)):
        parents = scenario.parents(j)
        for ks in product(range(1, n + 1), repeat=len(parents)):
            wiring.append((j, ks, [index[i, k] for i, k in zip(parents, ks)]))
    return _assemble(f"web:{n}", scenario, sources, wiring, nonsignaling=n == 1)


def build_inflation(scenario: Scenario, spec: str) -> Inflation:
    """Named built-ins: "cut", "spiral", "ring:L" / "ring@L", "web:n" / "web@n"."""
    match = re.fullmatch(r"\s*([a-z]+)\s*(?:[:@]\s*(\d+))?\s*", spec)
    if not match:
        raise InflationError(f"cannot parse inflation name {spec!r}")
    kind, arg = match.group(1), match.group(2)
    if kind == "cut" and arg is None:
        return make_cut(scenario)
    if kind == "spiral" and arg is None:
        return make_spiral(scenario)
    if kind == "ring" and arg is not None:
        return make_ring(scenario, int(arg))
    if kind == "web" and arg is not None:
        return make_web(scenario, int(arg))
    raise InflationError(f"unknown inflation {spec!r}")


def _copy_key(raw) -> tuple[str, CopyLabel]:
    name, label = raw
    label = (label,) if isinstance(label, int) else tuple(int(k) for k in label)
    return str(name), label


def inflation_from_description(raw: Mapping, base: Scenario) -> Inflation:
    """Explicit inflation: named source/observer copies plus an edge list."""
    try:
        sources = [_copy_key(s) for s in raw["sources"]]
        observers = [_copy_key(o) for o in raw["observers"]]
        src_pos = {key: k for k, key in enumerate(sources)}
        obs_pos = {key: w for w, key in enumerate(observers)}
        feeds: dict[int, list[int]] = {w: [] for w in range(len(observers))}
        for src, obs in raw["edges"]:
            feeds[obs_pos[_copy_key(obs)]].append(src_pos[_copy_key(src)])
        source_copies = [(base.sources.index(n), label) for n, label in sources]
        wiring = [
            (base.observers.index(n), label, feeds[w])
            for w, (n, label) in enumerate(observers)
        ]
    except (KeyError, ValueError, TypeError) as e:
        raise InflationError(f"bad inflation description: {e}") from e
    return _assemble(
        str(raw.get("name", "inflation")),
        base,
        source_copies,
        wiring,
        nonsignaling=bool(raw.get("nonsignaling", True)),
    )


def load_inflation(path: Union[str, Path], base: Scenario) -> Inflation:
    with open(path, encoding="utf-8") as fh:
        return inflation_from_description(json.load(fh), base)


def resolve_inflation(scenario: Scenario, name_or_path: str) -> Inflation:
    if Path(name_or_path).is_file():
        return load_inflation(name_or_path, scenario)
    return build_inflation(scenario, name_or_path)


# --- Copy symmetries ---

def inflation_graph(inflation: Inflation) -> nx.DiGraph:
    graph = nx.DiGraph()
    for k, (base, _) in enumerate(inflation.source_copies):
        graph.add_node(("s", k), kind="source", base=base)
    for t, (base, _) in enumerate(inflation.observer_copies):
        graph.add_node(("o", t), kind="observer", base=base)
    graph.add_edges_from((("s", k), ("o", t)) for k, t in inflation.edges)
    return graph


def copy_automorphisms(inflation: Inflation) -> list[tuple[int, ...]]:
    """Observer-copy permutations induced by relabeling source copies of one type.

    Copies of a source are i.i.d., so the inflated support is invariant under them.
    """
    graph = inflation_graph(inflation)
    matcher = DiGraphMatcher(
        graph, graph, node_match=lambda a, b: a["kind"] == b["kind"] and a["base"] == b["base"]
    )
    n = len(inflation.observer_copies)
    found = {tuple(m[("o", t)][1] for t in range(n)) for m in matcher.isomorphisms_iter()}
    log.debug("%s: %d copy automorphisms", inflation.name, len(found))
    return sorted(found)


# --- AI-expressible sets ---

@dataclass(frozen=True)
class AiComponent:
    copies: tuple[int, ...]     # observer copies, ascending
    observers: tuple[int, ...]  # their base observers, same order (ascending too)


@dataclass(frozen=True)
class AiSet:
    members: tuple[int, ...]
    components: tuple[AiComponent, ...]

    def monomial(self, outcomes: tuple[int, ...]) -> Monomial:
        """Base-scenario monomial of an outcome assignment to `members`."""
        value = dict(zip(self.members, outcomes))
        return Monomial(tuple(
            Valuation.of({obs: value[t] for t, obs in zip(c.copies, c.observers)})
            for c in self.components
        ))


def _components(inflation: Inflation, members: tuple[int, ...]) -> list[tuple[int, ...]]:
    feeds = {t: set(inflation.feeds(t)) for t in members}
    remaining = list(members)
    groups = []
    while remaining:
        stack, group = [remaining.pop(0)], set()
        while stack:
            t = stack.pop()
            group.add(t)
            for u in list(remaining):
                if feeds[t] & feeds[u]:
                    remaining.remove(u)
                    stack.append(u)
        groups.append(tuple(sorted(group)))
    return sorted(groups)


def is_ai_expressible(inflation: Inflation, members) -> Optional[AiSet]:
    """The AiSet for `members`, or None when some component has no faithful base match."""
    members = tuple(sorted(set(members)))
    comps = []
    for group in _components(inflation, members):
        types = [inflation.observer_type(t) for t in group]
        if len(set(types)) != len(types):
            return None
        for a, b in combinations(group, 2):
            ma, mb = inflation.source_map[a], inflation.source_map[b]
            if any(ma[i] != mb[i] for i in ma.keys() & mb.keys()):
                return None
        comps.append(AiComponent(group, tuple(types)))
    return AiSet(members, tuple(comps))


# AI sets depend only on the inflation
_AI_SETS: dict[tuple[Inflation, bool], tuple[AiSet, ...]] = {}


def ai_expressible_sets(inflation: Inflation, maximal_only: bool = True) -> tuple[AiSet, ...]:
    """AI-expressible observer-copy sets, ordered by (size, members)."""
    key = (inflation, maximal_only)
    if key in _AI_SETS:
        return _AI_SETS[key]

    n = len(inflation.observer_copies)
    found: dict[tuple[int, ...], AiSet] = {}

    def extend(members: tuple[int, ...], start: int) -> None:
        for x in range(start, n):
            candidate = members + (x,)
            ai = is_ai_expressible(inflation, candidate)
            if ai is not None:
                found[candidate] = ai
                extend(candidate, x + 1)

    # expressibility is hereditary, so growing in increasing order reaches every set
    extend((), 0)
    sets = sorted(found.values(), key=lambda a: (len(a.members), a.members))
    if maximal_only:
        keys = {frozenset(a.members) for a in sets}
        sets = [
            a for a in sets
            if not any(frozenset(a.members) | {x} in keys for x in range(n) if x not in a.members)
        ]
    log.debug("%s: %d %sAI-expressible sets", inflation.name, len(sets),
              "maximal " if maximal_only else "")
    _AI_SETS[key] = tuple(sets)
    return _AI_SETS[key]


# --- Constraint systems ---

@dataclass(frozen=True, eq=False)
class ConstraintBlock:
    ai_set: AiSet
    rhs: np.ndarray  # over the members' outcomes: bool for patterns, Fractions for distributions


@dataclass(frozen=True)
class Constraint:
    block: int
    outcomes: tuple[int, ...]
    value: object  # bool or Fraction


@dataclass(frozen=True)
class CopyEvent:
    """Impossible assignment to an AI-expressible subset of some block's members."""

    members: tuple[int, ...]
    outcomes: tuple[int, ...]
    value: object = False


def _block_rhs(inflation: Inflation, ai_set: AiSet, vector: Vector, tables: dict) -> np.ndarray:
    shape = tuple(inflation.outcomes[t] for t in ai_set.members)
    is_pattern = isinstance(vector, Pattern)
    rhs = np.empty(shape, dtype=bool if is_pattern else object)
    where = {t: p for p, t in enumerate(ai_set.members)}
    for comp in ai_set.components:
        if comp.observers not in tables:
            tables[comp.observers] = marginal_tensor(vector, comp.observers)
    for outcomes in np.ndindex(*shape):
        parts = [
            tables[c.observers][tuple(outcomes[where[t]] for t in c.copies)]
            for c in ai_set.components
        ]
        if is_pattern:
            rhs[outcomes] = all(bool(p) for p in parts)
        else:
            value = parts[0]
            for p in parts[1:]:
                value = value * p
            rhs[outcomes] = value
    return rhs


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    inflation: Inflation
    source: Vector
    blocks: tuple[ConstraintBlock, ...]

    def constraints(self) -> Iterator[Constraint]:
        for b, block in enumerate(self.blocks):
            for outcomes in np.ndindex(*block.rhs.shape):
                yield Constraint(b, tuple(int(o) for o in outcomes), block.rhs[outcomes])

    def members(self, constraint: Union[Constraint, CopyEvent]) -> tuple[int, ...]:
        if isinstance(constraint, CopyEvent):
            return constraint.members
        return self.blocks[constraint.block].ai_set.members

    def region(self, constraint: Union[Constraint, CopyEvent]) -> np.ndarray:
        """Bool tensor of inflation joint outcomes counted by the constraint."""
        members = self.members(constraint)
        region = np.zeros(self.inflation.outcomes, dtype=bool)
        index: list = [slice(None)] * len(self.inflation.outcomes)
        for t, o in zip(members, constraint.outcomes):
            index[t] = o
        region[tuple(index)] = True
        return region

    def mask(self, constraint: Union[Constraint, CopyEvent]) -> int:
        """Region as a bitset; bit i is joint index i."""
        return bits_to_int(self.region(constraint).reshape(-1))

    def monomial(self, constraint: Union[Constraint, CopyEvent]) -> Monomial:
        if isinstance(constraint, CopyEvent):
            ai_set = is_ai_expressible(self.inflation, constraint.members)
            if ai_set is None:
                raise InflationError(f"{self.inflation.name}: copies {constraint.members} are not AI-expressible")
            return ai_set.monomial(constraint.outcomes)
        return self.blocks[constraint.block].ai_set.monomial(constraint.outcomes)

    def name(self, constraint: Union[Constraint, CopyEvent]) -> str:
        members = self.members(constraint)
        label = probability_label(
            [self.inflation.observer_name(t) for t in members], constraint.outcomes
        )
        if isinstance(constraint.value, (bool, np.bool_)):
            return f"{label} = {'OK' if constraint.value else 'NOPE'}"
        return f"{label} = {constraint.value}"


def bits_to_int(bits: np.ndarray) -> int:
    packed = np.packbits(np.asarray(bits, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def block_ids(inflation: Inflation, ai_set: AiSet) -> np.ndarray:
    """For every inflation joint index, the flat index of its members' outcomes."""
    table = inflation.scenario.outcome_table[:, list(ai_set.members)]
    shape = tuple(inflation.outcomes[t] for t in ai_set.members)
    return np.ravel_multi_index(tuple(table.T), shape)


def constraint_system(inflation: Inflation, vector: Vector, maximal_only: bool = True) -> ConstraintSystem:
    if vector.scenario != inflation.base:
        raise InflationError(
            f"{inflation.name} inflates {inflation.base.name}, not {vector.scenario.name}"
        )
    tables: dict = {}
    blocks = tuple(
        ConstraintBlock(a, _block_rhs(inflation, a, vector, tables))
        for a in ai_expressible_sets(inflation, maximal_only)
    )
    return ConstraintSystem(inflation, vector, blocks)
