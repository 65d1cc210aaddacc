"""
Orbit classification pipeline.

Every orbit representative runs through an ordered list of stages until one
of them settles its label. Stage functions live in the STAGES registry; each
call is wrapped so a failing stage marks that orbit and the run continues.
"""

import logging
import re
import sqlite3
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .certificates import extract_certificate, to_inequality
from .config import DEFAULT_STAGES
from .db import load_stage_result, save_stage_result
from .encodings import (
    ResponseTables,
    decode_and_verify_local,
    encode_inflation,
    encode_local,
    possible_worlds_decide,
)
from .errors import PossnetError
from .inflation import build_inflation, constraint_system
from .models import ClassificationRecord, PipelineConfig, StageResult
from .possibility import Contradiction, check_factorization, propagate_and_refute
from .sat import solve
from .scenario import Pattern, Scenario, resolve_scenario
from .symmetry import cardinality_cap, partition_into_orbits

log = logging.getLogger(__name__)

Param = Union[None, int, tuple[int, int]]


# --- Stage grammar ---

@dataclass(frozen=True)
class StageSpec:
    name: str
    param: Param = None

    @property
    def key(self) -> str:
        if self.param is None:
            return self.name
        if isinstance(self.param, tuple):
            return f"{self.name}@{self.param[0]}..{self.param[1]}"
        return f"{self.name}@{self.param}"


_STAGE = re.compile(r"([a-z-]+)(?:[@:](\d+)(?:\.\.(\d+))?)?")


def parse_stages(items: Union[str, Sequence[str]]) -> tuple[StageSpec, ...]:
    """"sat-local@2,ring:6,possible-worlds@3..12" -> StageSpecs, checked against STAGES."""
    if isinstance(items, str):
        items = items.split(",")
    specs = []
    for raw in items:
        raw = raw.strip()
        match = _STAGE.fullmatch(raw)
        if not match or match.group(1) not in STAGES:
            raise ValueError(f"unknown stage {raw!r}; known: {', '.join(STAGES)}")
        name, lo, hi = match.groups()
        takes = STAGE_PARAMS[name]
        if takes == "none" and lo is not None:
            raise ValueError(f"stage {name} takes no parameter")
        if takes != "none" and lo is None:
            raise ValueError(f"stage {name} needs a parameter")
        if hi is not None and takes != "range":
            raise ValueError(f"stage {name} does not take a range")
        if takes == "range":
            first, last = int(lo), int(hi if hi is not None else lo)
            if not 1 <= first <= last:
                raise ValueError(f"bad range in {raw!r}")
            param: Param = (first, last)
        else:
            param = None if lo is None else int(lo)
        specs.append(StageSpec(name, param))
    if not specs:
        raise ValueError("empty stage list")
    return tuple(specs)


# --- Stage functions ---

def run_factorization(pattern: Pattern, param: Param, config: PipelineConfig) -> StageResult:
    found = check_factorization(pattern)
    if found.passed:
        return StageResult("factorization", "pass")
    names = pattern.scenario.observers
    return StageResult("factorization", "fail", {
        "observers": [names[found.pair[0]], names[found.pair[1]]],
        "outcomes": list(found.outcomes),
    })


def run_sat_local(pattern: Pattern, k: int, config: PipelineConfig) -> StageResult:
    stage = f"sat-local@{k}"
    alphabets = (k,) * len(pattern.scenario.sources)
    result = solve(encode_local(pattern, alphabets), config.max_conflicts, config.time_limit)
    stats = {"conflicts": result.stats.conflicts, "decisions": result.stats.decisions}
    if result.status == "sat":
        tables = decode_and_verify_local(result.model, pattern, alphabets)
        return StageResult(stage, "local", {"k": k, **tables.to_dict()})
    if result.status == "unsat":
        return StageResult(stage, "no-model", stats)
    return StageResult(stage, "budget", stats)


def run_inflation(pattern: Pattern, name: str, config: PipelineConfig) -> StageResult:
    inflation = build_inflation(pattern.scenario, name)
    found = propagate_and_refute(constraint_system(inflation, pattern))
    if not isinstance(found, Contradiction):
        return StageResult(name, "consistent", {"nonsignaling": inflation.nonsignaling})
    witness = {"nonsignaling": inflation.nonsignaling, **found.to_dict()}
    witness["inequality"] = to_inequality(extract_certificate(found)).text()
    return StageResult(name, "contradiction", witness)


def run_inflation_sat(pattern: Pattern, name: str, config: PipelineConfig) -> StageResult:
    """Inflation feasibility as SAT with copy symmetries imposed."""
    inflation = build_inflation(pattern.scenario, name)
    stage = f"{name}-sat"
    instance = encode_inflation(inflation, pattern, symmetric=True)
    result = solve(instance, config.max_conflicts, config.time_limit)
    witness = {
        "nonsignaling": inflation.nonsignaling,
        "inflation": inflation.name,
        "encoding": "symmetric-cnf",
        "clauses": len(instance.clauses),
    }
    if result.status == "unsat":
        return StageResult(stage, "contradiction", witness)
    if result.status == "sat":
        return StageResult(stage, "consistent", witness)
    return StageResult(stage, "budget", witness)


def run_possible_worlds(pattern: Pattern, span: tuple[int, int], config: PipelineConfig) -> StageResult:
    first, last = span
    stage = f"possible-worlds@{first}..{last}"
    cap = cardinality_cap(pattern.scenario)
    nodes = 0
    for k in range(first, last + 1):
        result = possible_worlds_decide(pattern, k, config.node_budget)
        nodes += result.nodes
        if result.status == "local":
            return StageResult(stage, "local", {"k": k, "nodes": nodes, **result.tables.to_dict()})
        if result.status == "budget":
            return StageResult(stage, "budget", {"k": k, "nodes": nodes})
        if result.conclusive or (cap is not None and k >= cap):
            return StageResult(stage, "not-local", {"k": k, "nodes": nodes, "conclusive": result.conclusive})
    return StageResult(stage, "no-model", {"k": last, "nodes": nodes})


STAGES: dict[str, Callable[[Pattern, Param, PipelineConfig], StageResult]] = {
    "factorization": run_factorization,
    "sat-local": run_sat_local,
    "ring": lambda pattern, param, config: run_inflation(pattern, f"ring@{param}", config),
    "web": lambda pattern, param, config: run_inflation(pattern, f"web@{param}", config),
    "cut": lambda pattern, param, config: run_inflation(pattern, "cut", config),
    "spiral": lambda pattern, param, config: run_inflation(pattern, "spiral", config),
    "ring-sat": lambda pattern, param, config: run_inflation_sat(pattern, f"ring@{param}", config),
    "spiral-sat": lambda pattern, param, config: run_inflation_sat(pattern, "spiral", config),
    "possible-worlds": run_possible_worlds,
}

STAGE_PARAMS = {
    "factorization": "none",
    "sat-local": "int",
    "ring": "int",
    "web": "int",
    "cut": "none",
    "spiral": "none",
    "ring-sat": "int",
    "spiral-sat": "none",
    "possible-worlds": "range",
}


def run_stage(pattern: Pattern, spec: StageSpec, config: PipelineConfig) -> StageResult:
    try:
        result = STAGES[spec.name](pattern, spec.param, config)
    except Exception as e:
        log.warning("stage %s failed on %s: %s", spec.key, pattern.bitstring, e)
        return StageResult(spec.key, "error", error=str(e))
    result.stage = spec.key
    return result


# --- Labels ---

def stage_label(result: StageResult) -> Optional[str]:
    """Final label settled by one stage result, or None to keep going."""
    if result.verdict == "local":
        return f"local@{result.witness['k']}"
    if result.verdict == "fail":
        return f"signaling-enabling@{result.stage}"
    if result.verdict == "contradiction":
        kind = "signaling-enabling" if result.witness.get("nonsignaling") else "not-local-N-unknown"
        return f"{kind}@{result.stage}"
    if result.verdict == "not-local":
        return f"not-local-N-unknown@{result.stage}"
    return None


def deciding_result(record: ClassificationRecord) -> Optional[StageResult]:
    for result in record.stages:
        if stage_label(result) is not None:
            return result
    return None


def classify_orbit(
    scenario: Scenario,
    code: int,
    orbit_size: int,
    stages: Sequence[StageSpec],
    config: PipelineConfig,
    cached: Optional[dict[str, StageResult]] = None,
) -> ClassificationRecord:
    pattern = Pattern(scenario, code)
    record = ClassificationRecord(scenario.name, pattern.bitstring, pattern.literal, orbit_size)
    cached = cached or {}
    for spec in stages:
        result = cached.get(spec.key) or run_stage(pattern, spec, config)
        record.stages.append(result)
        log.debug("%s %s: %s", pattern.bitstring, spec.key, result.verdict)
        label = stage_label(result)
        if label is not None:
            record.label = label
            break
    return record


def _classify_task(args: tuple) -> ClassificationRecord:
    return classify_orbit(*args)


@dataclass
class RunResult:
    records: list[ClassificationRecord]
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        """Some orbit is unknown because a stage ran out of budget or failed."""
        return any(
            r.label == "unknown" and any(s.verdict in ("budget", "error") for s in r.stages)
            for r in self.records
        )


def summarize(records: Sequence[ClassificationRecord]) -> dict[str, int]:
    """Orbit counts per label, sorted by label."""
    return dict(sorted(Counter(r.label for r in records).items()))


def classify(config: PipelineConfig, conn: Optional[sqlite3.Connection] = None) -> RunResult:
    scenario = resolve_scenario(config.scenario)
    stages = parse_stages(config.stages or DEFAULT_STAGES.get(scenario.name, ()))
    orbits = partition_into_orbits(scenario, config.symmetric_only)

    tasks = []
    hits = 0
    for orbit in orbits:
        cached = {}
        if conn is not None and config.resume:
            for spec in stages:
                found = load_stage_result(conn, scenario.name, orbit.bitstring, spec.key)
                if found is not None:
                    cached[spec.key] = found
            hits += len(cached)
        tasks.append((scenario, orbit.representative.code, orbit.size, stages, config, cached))
    if hits:
        log.info("%s: reusing %d cached stage results", scenario.name, hits)

    log.info("%s: classifying %d orbits with %s", scenario.name, len(tasks), ",".join(s.key for s in stages))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_classify_task, tasks, chunksize=8))
    else:
        records = [_classify_task(t) for t in tasks]
    records.sort(key=lambda r: r.canonical)

    if conn is not None:
        for record in records:
            for result in record.stages:
                save_stage_result(conn, record.scenario, record.canonical, result)

    run = RunResult(records, summarize(records))
    log.info("%s: %s", scenario.name, ", ".join(f"{k}={v}" for k, v in run.counts.items()))
    return run


# --- Verification ---

def verify_record(record: ClassificationRecord, scenario: Optional[Scenario] = None) -> bool:
    """Re-check the witness behind a record's label."""
    scenario = scenario or resolve_scenario(record.scenario)
    pattern = Pattern.from_bitstring(scenario, record.canonical)
    result = deciding_result(record)
    if result is None:
        return record.label == "unknown"
    if stage_label(result) != record.label:
        return False
    try:
        if result.verdict == "local":
            return ResponseTables.from_dict(scenario, result.witness).generate() == pattern
        if result.verdict == "fail":
            return not check_factorization(pattern).passed
        if result.verdict == "contradiction" and "encoding" in result.witness:
            inflation = build_inflation(scenario, result.witness["inflation"])
            return solve(encode_inflation(inflation, pattern, symmetric=True)).unsat
        if result.verdict == "contradiction":
            inflation = build_inflation(scenario, result.witness["inflation"])
            found = propagate_and_refute(constraint_system(inflation, pattern))
            return isinstance(found, Contradiction) and found.to_dict()["violated"] == result.witness["violated"]
        if result.verdict == "not-local":
            return possible_worlds_decide(pattern, result.witness["k"]).status == "not-local"
    except (PossnetError, KeyError, ValueError) as e:
        log.warning("could not verify %s: %s", record.canonical, e)
        return False
    return False

