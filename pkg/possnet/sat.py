"""
CNF instances, a conflict-driven clause-learning solver and DIMACS I/O.
"""

import hashlib
import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .config import SAT_MAX_CONFLICTS, SAT_RESTART_UNIT, SAT_TIME_LIMIT, SAT_VAR_DECAY
from .errors import SolverError

log = logging.getLogger(__name__)


@dataclass
class CnfInstance:
    num_vars: int = 0
    clauses: list[tuple[int, ...]] = field(default_factory=list)
    names: dict[int, str] = field(default_factory=dict)

    def new_var(self, name: Optional[str] = None) -> int:
        self.num_vars += 1
        if name is not None:
            self.names[self.num_vars] = name
        return self.num_vars

    def add_clause(self, literals: Iterable[int]) -> None:
        clause = tuple(int(l) for l in literals)
        for lit in clause:
            if lit == 0 or abs(lit) > self.num_vars:
                raise ValueError(f"literal {lit} does not reference a declared variable")
        self.clauses.append(clause)

    def digest(self) -> str:
        """SHA-256 over the variable count and clause list (names excluded)."""
        h = hashlib.sha256(f"{self.num_vars}\n".encode())
        for clause in self.clauses:
            h.update((" ".join(map(str, clause)) + " 0\n").encode())
        return h.hexdigest()


@dataclass
class SolverStats:
    conflicts: int = 0
    decisions: int = 0
    propagations: int = 0
    restarts: int = 0
    learned: int = 0


@dataclass
class SolveResult:
    status: str  # "sat", "unsat" or "budget"
    model: Optional[dict[int, bool]] = None
    stats: SolverStats = field(default_factory=SolverStats)

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby restart sequence 1,1,2,1,1,2,4,..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while (1 << k) - 1 != i:
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1
    return 1 << (k - 1)


class CdclSolver:
    """Two-watched-literal CDCL with 1-UIP learning, VSIDS, phase saving and Luby restarts."""

    def __init__(
        self,
        instance: CnfInstance,
        max_conflicts: Optional[int] = None,
        time_limit: Optional[float] = None,
    ):
        self.instance = instance
        self.max_conflicts = SAT_MAX_CONFLICTS if max_conflicts is None else max_conflicts
        self.time_limit = SAT_TIME_LIMIT if time_limit is None else time_limit
        n = instance.num_vars
        self.n = n
        self.assign = [0] * (n + 1)  # 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason: list[Optional[int]] = [None] * (n + 1)
        self.phase = [False] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.var_inc = 1.0
        self.heap = [(0.0, v) for v in range(1, n + 1)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        for v in range(1, n + 1):
            self.watches[v] = []
            self.watches[-v] = []
        self.stats = SolverStats()

    # --- Assignment ---

    def value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def enqueue(self, lit: int, reason: Optional[int]) -> bool:
        val = self.value(lit)
        if val != 0:
            return val == 1
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def cancel_until(self, target: int) -> None:
        if len(self.trail_lim) <= target:
            return
        start = self.trail_lim[target]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.phase[v] = lit > 0
            self.assign[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[target:]
        self.qhead = len(self.trail)

    # --- Clauses ---

    def attach(self, clause: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.watches[clause[0]].append(ci)
        self.watches[clause[1]].append(ci)
        return ci

    def propagate(self) -> Optional[int]:
        """Unit propagation; returns a conflicting clause index or None."""
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            watching = self.watches[false_lit]
            kept = []
            i = 0
            while i < len(watching):
                ci = watching[i]
                i += 1
                clause = self.clauses[ci]
                if clause[0] == false_lit:
                    clause[0], clause[1] = clause[1], clause[0]
                if self.value(clause[0]) == 1:
                    kept.append(ci)
                    continue
                for k in range(2, len(clause)):
                    if self.value(clause[k]) != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches[clause[1]].append(ci)
                        break
                else:
                    kept.append(ci)
                    if self.value(clause[0]) == -1:
                        kept.extend(watching[i:])
                        self.watches[false_lit] = kept
                        return ci
                    self.enqueue(clause[0], ci)
                    self.stats.propagations += 1
            self.watches[false_lit] = kept
        return None

    # --- Conflict analysis ---

    def bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.n + 1) if self.assign[u] == 0]
            heapq.heapify(self.heap)
        elif self.assign[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def analyze(self, conflict: int) -> tuple[list[int], int]:
        """First-UIP learned clause (asserting literal first) and its backjump level."""
        seen = [False] * (self.n + 1)
        learnt = [0]
        current = len(self.trail_lim)
        pending = 0
        idx = len(self.trail) - 1
        clause = self.clauses[conflict]
        p = None
        while True:
            for q in (clause if p is None else clause[1:]):
                v = abs(q)
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self.bump(v)
                    if self.level[v] == current:
                        pending += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen[abs(p)] = False
            pending -= 1
            if pending == 0:
                break
            clause = self.clauses[self.reason[abs(p)]]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: self.level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def pick_branch(self) -> Optional[int]:
        while self.heap:
            neg, v = heapq.heappop(self.heap)
            if self.assign[v] == 0 and -neg == self.activity[v]:
                return v if self.phase[v] else -v
        for v in range(1, self.n + 1):
            if self.assign[v] == 0:
                return v if self.phase[v] else -v
        return None

    # --- Search ---

    def _load(self) -> bool:
        """Attach clauses and enqueue units; False on a trivially unsatisfiable input."""
        for raw in self.instance.clauses:
            clause = list(dict.fromkeys(raw))
            if any(-lit in clause for lit in clause):
                continue
            if not clause:
                return False
            if len(clause) == 1:
                if not self.enqueue(clause[0], None):
                    return False
            else:
                self.attach(clause)
        return True

    def solve(self) -> SolveResult:
        heapq.heapify(self.heap)
        if not self._load() or self.propagate() is not None:
            return SolveResult("unsat", stats=self.stats)
        start = time.monotonic()
        restart_index = 1
        budget = luby(restart_index) * SAT_RESTART_UNIT
        since_restart = 0
        while True:
            conflict = self.propagate()
            if conflict is not None:
                self.stats.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    return SolveResult("unsat", stats=self.stats)
                learnt, back = self.analyze(conflict)
                self.cancel_until(back)
                if len(learnt) == 1:
                    self.enqueue(learnt[0], None)
                else:
                    self.enqueue(learnt[0], self.attach(learnt))
                    self.stats.learned += 1
                self.var_inc /= SAT_VAR_DECAY
                if self.stats.conflicts >= self.max_conflicts:
                    return SolveResult("budget", stats=self.stats)
                if time.monotonic() - start > self.time_limit:
                    return SolveResult("budget", stats=self.stats)
                continue
            if since_restart >= budget:
                self.stats.restarts += 1
                restart_index += 1
                budget = luby(restart_index) * SAT_RESTART_UNIT
                since_restart = 0
                self.cancel_until(0)
                continue
            lit = self.pick_branch()
            if lit is None:
                return SolveResult("sat", self._model(), self.stats)
            self.stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self.enqueue(lit, None)

    def _model(self) -> dict[int, bool]:
        model = {v: self.assign[v] == 1 for v in range(1, self.n + 1)}
        for clause in self.instance.clauses:
            if not any(model[abs(l)] == (l > 0) for l in clause):
                raise SolverError(f"model violates clause {clause}")
        return model


def solve(
    instance: CnfInstance,
    max_conflicts: Optional[int] = None,
    time_limit: Optional[float] = None,
) -> SolveResult:
    result = CdclSolver(instance, max_conflicts, time_limit).solve()
    log.debug(
        "solve: %s after %d conflicts, %d decisions, %d restarts",
        result.status, result.stats.conflicts, result.stats.decisions, result.stats.restarts,
    )
    return result


# --- DIMACS ---

def export_dimacs(instance: CnfInstance) -> str:
    lines = [f"c {v} {name}" for v, name in sorted(instance.names.items())]
    lines.append(f"p cnf {instance.num_vars} {len(instance.clauses)}")
    lines.extend(" ".join(map(str, clause + (0,))) for clause in instance.clauses)
    return "\n".join(lines) + "\n"


def import_dimacs(text: str) -> CnfInstance:
    instance = CnfInstance()
    pending: list[int] = []
    declared = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("%"):
            break
        if line.startswith("c"):
            parts = line.split(maxsplit=2)
            if len(parts) == 3 and parts[1].isdigit():
                instance.names[int(parts[1])] = parts[2]
            continue
        if line.startswith("p"):
            _, fmt, nv, nc = line.split()
            if fmt != "cnf":
                raise ValueError(f"unsupported DIMACS format {fmt!r}")
            instance.num_vars = int(nv)
            declared = int(nc)
            continue
        for token in line.split():
            lit = int(token)
            if lit == 0:
                instance.add_clause(pending)
                pending = []
            else:
                pending.append(lit)
    if pending:
        instance.add_clause(pending)
    if declared is not None and declared != len(instance.clauses):
        log.warning("DIMACS header declares %d clauses, found %d", declared, len(instance.clauses))
    return instance
