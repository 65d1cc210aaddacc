"""
Encodings of locality questions: response-table SAT models, the
possible-worlds search and the possibilistic inflation CNF.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import product
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .config import POSSIBLE_WORLDS_NODE_BUDGET
from .errors import EncodingError, PatternError
from .inflation import Inflation, block_ids, constraint_system, copy_automorphisms
from .models import RelaxationParams
from .sat import CnfInstance
from .scenario import Pattern, Scenario, collapse_scalar, probability_label
from .symmetry import Relabeling

log = logging.getLogger(__name__)

Cell = tuple[int, ...]  # values of an observer's parent sources, in source order


# --- Response tables ---

@dataclass(frozen=True)
class DeterministicWorld:
    """One outcome per observer and parent-value tuple."""

    scenario: Scenario
    alphabets: tuple[int, ...]
    functions: tuple[Mapping[Cell, int], ...]

    def outcomes(self) -> set[tuple[int, ...]]:
        parents = [self.scenario.parents(j) for j in range(len(self.scenario.observers))]
        return {
            tuple(f[tuple(h[i] for i in par)] for f, par in zip(self.functions, parents))
            for h in product(*(range(c) for c in self.alphabets))
        }


@dataclass(frozen=True)
class ResponseTables:
    """Per observer, the set of possible outcomes for each parent-value tuple."""

    scenario: Scenario
    alphabets: tuple[int, ...]
    tables: tuple[Mapping[Cell, frozenset[int]], ...]

    def generate(self) -> Pattern:
        """Pattern produced by the tables, summed over all hidden tuples."""
        scenario = self.scenario
        parents = [scenario.parents(j) for j in range(len(scenario.observers))]
        bits = np.zeros(scenario.outcomes, dtype=bool)
        for h in product(*(range(c) for c in self.alphabets)):
            rows = []
            for j, par in enumerate(parents):
                row = np.zeros(scenario.outcomes[j], dtype=bool)
                row[list(self.tables[j][tuple(h[i] for i in par)])] = True
                rows.append(row)
            bits |= reduce(np.logical_and.outer, rows)
        return Pattern.from_bits(scenario, bits.reshape(-1))

    def worlds(self, limit: Optional[int] = None) -> Iterator[DeterministicWorld]:
        """Deterministic refinements; together they generate the same support."""
        cells = [(j, u) for j, table in enumerate(self.tables) for u in sorted(table)]
        choices = [sorted(self.tables[j][u]) for j, u in cells]
        for n, picks in enumerate(product(*choices)):
            if limit is not None and n >= limit:
                return
            functions: list[dict[Cell, int]] = [{} for _ in self.tables]
            for (j, u), o in zip(cells, picks):
                functions[j][u] = o
            yield DeterministicWorld(self.scenario, self.alphabets, tuple(functions))

    def to_dict(self) -> dict:
        return {
            "alphabets": list(self.alphabets),
            "tables": {
                self.scenario.observers[j]: {
                    ",".join(map(str, u)): sorted(outs) for u, outs in sorted(table.items())
                }
                for j, table in enumerate(self.tables)
            },
        }

    @classmethod
    def from_dict(cls, scenario: Scenario, data: Mapping) -> "ResponseTables":
        tables = []
        for name in scenario.observers:
            raw = data["tables"][name]
            tables.append({
                tuple(int(v) for v in key.split(",") if v != ""): frozenset(outs)
                for key, outs in raw.items()
            })
        return cls(scenario, tuple(data["alphabets"]), tuple(tables))


# --- Local model SAT encoding ---

def _cells(scenario: Scenario, alphabets: Sequence[int], j: int) -> list[Cell]:
    return list(product(*(range(alphabets[i]) for i in scenario.parents(j))))


def _response_variables(instance: CnfInstance, scenario: Scenario, alphabets: Sequence[int]) -> dict:
    """Declare response-table variables first, in (observer, cell, outcome) order."""
    variables = {}
    for j, obs in enumerate(scenario.observers):
        par = scenario.parents(j)
        for u in _cells(scenario, alphabets, j):
            given = ",".join(f"{scenario.sources[i]}={v}" for i, v in zip(par, u))
            for o in range(scenario.outcomes[j]):
                variables[j, u, o] = instance.new_var(f"P_{obs}({o}|{given})")
    return variables


def _hidden_tuples(
    alphabets: Sequence[int],
    relaxation: Optional[RelaxationParams],
    marginals: Optional[Sequence[Sequence]] = None,
) -> list[tuple[int, ...]]:
    """Hidden tuples of positive weight under the (possibly correlated) source distribution.

    Independent sources give P(h) = prod_i p_i(h_i); correlated sources are only
    bounded below by eps1 times that product, so both keep exactly the tuples whose
    product weight survives collapse. Marginals default to uniform.
    """
    if marginals is None:
        marginals = [[Fraction(1, c)] * c for c in alphabets]
    marginals = [[Fraction(p) for p in row] for row in marginals]
    if [len(row) for row in marginals] != list(alphabets):
        raise PatternError(f"source marginals {marginals} do not match alphabets {alphabets}")
    eps1 = relaxation.eps1 if relaxation is not None else Fraction(1)
    tuples = []
    for h in product(*(range(c) for c in alphabets)):
        weight = eps1 * math.prod(marginals[i][v] for i, v in enumerate(h))
        if collapse_scalar(weight):
            tuples.append(h)
    return tuples


def encode_local(
    pattern: Pattern,
    alphabets: Sequence[int],
    relaxation: Optional[RelaxationParams] = None,
    marginals: Optional[Sequence[Sequence]] = None,
) -> CnfInstance:
    """CNF satisfiable iff the pattern has a local model with these source alphabets.

    marginals fixes each source's value distribution; values of weight zero never occur.
    """
    scenario = pattern.scenario
    alphabets = tuple(int(c) for c in alphabets)
    if len(alphabets) != len(scenario.sources) or min(alphabets) < 1:
        raise PatternError(f"need one alphabet size >= 1 per source, got {alphabets}")
    instance = CnfInstance()
    x = _response_variables(instance, scenario, alphabets)
    parents = [scenario.parents(j) for j in range(len(scenario.observers))]

    for j in range(len(scenario.observers)):
        for u in _cells(scenario, alphabets, j):
            instance.add_clause(x[j, u, o] for o in range(scenario.outcomes[j]))

    hidden = _hidden_tuples(alphabets, relaxation, marginals)
    bits = pattern.bits
    for index in range(scenario.size):
        event = scenario.outcome_tuple(index)
        label = probability_label(scenario.observers, event)
        witnesses = []
        for h in hidden:
            lits = [x[j, tuple(h[i] for i in par), event[j]] for j, par in enumerate(parents)]
            if not bits[index]:
                instance.add_clause(-l for l in lits)
                continue
            y = instance.new_var(f"{label}@{','.join(map(str, h))}")
            for l in lits:
                instance.add_clause((-y, l))
            witnesses.append(y)
        if bits[index]:
            instance.add_clause(witnesses)
    return instance


def decode_and_verify_local(model: Mapping[int, bool], pattern: Pattern, alphabets: Sequence[int]) -> ResponseTables:
    """Read response tables out of an encode_local model and re-check them by brute force."""
    scenario = pattern.scenario
    alphabets = tuple(int(c) for c in alphabets)
    layout = _response_variables(CnfInstance(), scenario, alphabets)
    tables = []
    for j in range(len(scenario.observers)):
        table = {}
        for u in _cells(scenario, alphabets, j):
            table[u] = frozenset(
                o for o in range(scenario.outcomes[j]) if model.get(layout[j, u, o], False)
            )
            if not table[u]:
                raise EncodingError(f"empty response cell for {scenario.observers[j]} at {u}")
        tables.append(table)
    found = ResponseTables(scenario, alphabets, tuple(tables))
    generated = found.generate()
    if generated != pattern:
        raise EncodingError(
            f"decoded tables generate {generated.literal}, expected {pattern.literal}"
        )
    return found


# --- Possible worlds ---

@dataclass(frozen=True)
class WorldsResult:
    status: str  # "local", "not-local" or "budget"
    k: int
    tables: Optional[ResponseTables] = None
    nodes: int = 0
    conclusive: bool = False  # not-local at every alphabet size


class _BudgetExceeded(Exception):
    pass


class _WorldSearch:
    """Give every possible event a hidden-tuple witness, then fill the untouched cells.

    Before branching, each unwitnessed event is tried at every allowed hidden
    tuple against the impossible events; the event with the fewest viable
    tuples goes next and a dead event ends the branch. A source value may only
    be new if it is the next unused one.
    """

    # candidate placements checked per numpy batch
    BATCH_CELLS = 1 << 21

    def __init__(self, pattern: Pattern, k: int, budget: int):
        self.scenario = scenario = pattern.scenario
        self.k = k
        self.budget = budget
        self.nodes = 0
        self.events = pattern.support()
        self.forbidden = np.array(
            [scenario.outcome_tuple(int(i)) for i in np.flatnonzero(~pattern.bits)],
            dtype=np.intp,
        ).reshape(-1, len(scenario.observers))
        self.parents = [scenario.parents(j) for j in range(len(scenario.observers))]
        self.cells = [
            np.zeros((k,) * len(par) + (scenario.outcomes[j],), dtype=bool)
            for j, par in enumerate(self.parents)
        ]
        # flat views share memory with `cells`
        self.flat = [c.reshape(-1, c.shape[-1]) for c in self.cells]
        self.hidden = np.array(list(product(range(k), repeat=len(scenario.sources))), dtype=np.intp)
        self.cell_index = [
            np.ravel_multi_index(tuple(self.hidden[:, list(par)].T), (k,) * len(par))
            if par else np.zeros(len(self.hidden), dtype=np.intp)
            for par in self.parents
        ]
        self.used = [0] * len(scenario.sources)

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetExceeded

    def violates(self, cells: list[np.ndarray], sizes: Sequence[int]) -> bool:
        """Whether some hidden tuple can produce an impossible event."""
        if not len(self.forbidden):
            return False
        acc = None
        count = len(self.forbidden)
        for j, table in enumerate(cells):
            picked = table[..., self.forbidden[:, j]]
            shape = [1] * len(sizes) + [count]
            for i in self.parents[j]:
                shape[i] = sizes[i]
            picked = picked.reshape(shape)
            acc = picked if acc is None else acc & picked
        return bool(acc.any())

    def witnessed(self, event: tuple[int, ...]) -> bool:
        acc = np.ones(len(self.hidden), dtype=bool)
        for j, flat in enumerate(self.flat):
            acc &= flat[self.cell_index[j], event[j]]
        return bool(acc.any())

    def viable(self, event: tuple[int, ...], candidates: np.ndarray) -> np.ndarray:
        """For each candidate hidden-tuple row, whether placing `event` there stays clean."""
        if not len(self.forbidden) or not len(candidates):
            return np.ones(len(candidates), dtype=bool)
        produced = [flat[idx][:, self.forbidden[:, j]] for j, (flat, idx) in enumerate(zip(self.flat, self.cell_index))]
        matches = [self.forbidden[:, j] == event[j] for j in range(len(self.flat))]
        per_row = len(self.hidden) * len(self.forbidden)
        step = max(1, self.BATCH_CELLS // per_row)
        out = np.empty(len(candidates), dtype=bool)
        for start in range(0, len(candidates), step):
            rows = candidates[start:start + step]
            acc = None
            for j, idx in enumerate(self.cell_index):
                same = idx[rows][:, None] == idx[None, :]
                now = produced[j][None, :, :] | (same[:, :, None] & matches[j][None, None, :])
                acc = now if acc is None else acc & now
            out[start:start + step] = ~acc.any(axis=(1, 2))
        return out

    def place(self) -> Optional[list[np.ndarray]]:
        self.tick()
        open_events = [e for e in self.events if not self.witnessed(e)]
        if not open_events:
            return self.complete()
        limits = np.array([min(self.k, n + 1) for n in self.used], dtype=np.intp)
        allowed = np.flatnonzero((self.hidden < limits).all(axis=1))
        best = None
        for event in open_events:
            rows = allowed[self.viable(event, allowed)]
            if not len(rows):
                return None
            if best is None or len(rows) < len(best[1]):
                best = (event, rows)
        event, rows = best
        for row in rows:
            changed = []
            for j, flat in enumerate(self.flat):
                key = (self.cell_index[j][row], event[j])
                if not flat[key]:
                    flat[key] = True
                    changed.append((j, key))
            saved = list(self.used)
            self.used = [max(n, int(v) + 1) for n, v in zip(self.used, self.hidden[row])]
            found = self.place()
            if found is not None:
                return found
            self.used = saved
            for j, key in changed:
                self.flat[j][key] = False
        return None

    def complete(self) -> Optional[list[np.ndarray]]:
        sizes = tuple(self.used)
        cells = [
            table[tuple(slice(0, sizes[i]) for i in par)].copy()
            for table, par in zip(self.cells, self.parents)
        ]
        free = [
            (j, u)
            for j, table in enumerate(cells)
            for u in np.ndindex(*table.shape[:-1])
            if not table[u].any()
        ]
        return cells if self.fill(cells, sizes, free, 0) else None

    def fill(self, cells: list[np.ndarray], sizes, free, pos: int) -> bool:
        if pos == len(free):
            return True
        self.tick()
        j, u = free[pos]
        for o in range(cells[j].shape[-1]):
            cells[j][u + (o,)] = True
            if not self.violates(cells, sizes) and self.fill(cells, sizes, free, pos + 1):
                return True
            cells[j][u + (o,)] = False
        return False

    def tables(self, cells: list[np.ndarray]) -> ResponseTables:
        sizes = tuple(self.used)
        out = []
        for table in cells:
            out.append({
                tuple(int(v) for v in u): frozenset(int(o) for o in np.flatnonzero(table[u]))
                for u in np.ndindex(*table.shape[:-1])
            })
        return ResponseTables(self.scenario, sizes, tuple(out))


def possible_worlds_decide(pattern: Pattern, k: int, budget: Optional[int] = None) -> WorldsResult:
    """Decide locality at source alphabet size k by exhaustive world search.

    A local model never needs more values per source than there are possible
    events, so a not-local answer at k >= support size holds for every k.
    """
    if k < 1:
        raise PatternError("alphabet size must be at least 1")
    if not pattern.is_normalized:
        raise PatternError("the all-impossible pattern has no model")
    budget = POSSIBLE_WORLDS_NODE_BUDGET if budget is None else budget
    effective = min(k, pattern.support_size)
    search = _WorldSearch(pattern, effective, budget)
    try:
        cells = search.place()
    except _BudgetExceeded:
        log.warning("possible worlds: node budget %d exhausted at k=%d", budget, k)
        return WorldsResult("budget", k, nodes=search.nodes)
    if cells is None:
        return WorldsResult("not-local", k, nodes=search.nodes,
                            conclusive=effective == pattern.support_size)
    tables = search.tables(cells)
    if tables.generate() != pattern:
        raise EncodingError("possible-worlds tables do not reproduce the pattern")
    return WorldsResult("local", k, tables, search.nodes)


# --- Inflation CNF ---

def encode_inflation(inflation: Inflation, pattern: Pattern, symmetric: bool = False) -> CnfInstance:
    """One variable per inflation event; impossible constraints become negative
    units, possible ones a clause over their region.

    Without `symmetric` the CNF is satisfiable exactly when propagate_and_refute
    finds no contradiction. With it, events swapped by a copy automorphism must
    agree, which can only add refutations.
    """
    system = constraint_system(inflation, pattern)
    scenario = inflation.scenario
    instance = CnfInstance()
    for row in scenario.outcome_table:
        instance.new_var(probability_label(scenario.observers, tuple(int(o) for o in row)))

    nope = np.zeros(inflation.size, dtype=bool)
    positive = []
    for block in system.blocks:
        ids = block_ids(inflation, block.ai_set)
        flat = block.rhs.reshape(-1)
        for f, possible in enumerate(flat):
            region = ids == f
            if possible:
                positive.append(np.flatnonzero(region) + 1)
            else:
                nope |= region
    for index in np.flatnonzero(nope):
        instance.add_clause((-(int(index) + 1),))
    for lits in positive:
        instance.add_clause(int(v) for v in lits)

    if symmetric:
        same = [tuple(range(n)) for n in scenario.outcomes]
        for perm in copy_automorphisms(inflation):
            moved = Relabeling(perm, tuple(same)).index_map(scenario)
            for i, j in enumerate(moved):
                if i != j:
                    instance.add_clause((-(i + 1), int(j) + 1))
    return instance
