"""
Report files for classification runs and the W-family study.
"""

import csv
import io
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Sequence, Union

from .certificates import certificate_text, extract_certificate
from .errors import ReportError
from .inflation import build_inflation, constraint_system
from .lp import WStudyRow
from .models import ClassificationRecord
from .pipeline import RunResult, deciding_result
from .possibility import Contradiction, propagate_and_refute
from .scenario import Pattern, resolve_scenario

log = logging.getLogger(__name__)


def record_to_dict(record: ClassificationRecord) -> dict:
    return asdict(record)


def certificate_sidecar(record: ClassificationRecord) -> str:
    """Certificate text for a record settled by an inflation contradiction."""
    result = deciding_result(record)
    if result is None or result.verdict != "contradiction":
        raise ValueError(f"{record.canonical} was not settled by an inflation")
    scenario = resolve_scenario(record.scenario)
    inflation = build_inflation(scenario, result.witness["inflation"])
    if "encoding" in result.witness:
        return (
            f"inflation: {inflation.name}\n"
            f"encoding: {result.witness['encoding']}, {result.witness['clauses']} clauses, unsatisfiable\n"
        )
    found = propagate_and_refute(constraint_system(inflation, Pattern.from_bitstring(scenario, record.canonical)))
    if not isinstance(found, Contradiction):
        raise ValueError(f"{record.canonical} is consistent with {inflation.name}")
    return certificate_text(extract_certificate(found))


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def summary_rows(records: Sequence[ClassificationRecord]) -> list[list]:
    rows = []
    for r in records:
        deciding = deciding_result(r)
        rows.append([r.canonical, r.literal, r.orbit_size, r.label, deciding.stage if deciding else ""])
    return rows


def count_rows(records: Sequence[ClassificationRecord]) -> list[list]:
    """Orbits and patterns per label."""
    orbits: dict[str, int] = {}
    patterns: dict[str, int] = {}
    for r in records:
        orbits[r.label] = orbits.get(r.label, 0) + 1
        patterns[r.label] = patterns.get(r.label, 0) + r.orbit_size
    rows = [[label, orbits[label], patterns[label]] for label in sorted(orbits)]
    rows.append(["total", len(records), sum(patterns.values())])
    return rows


def _write(path: Path, text: str, written: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    written.append(str(path))


def write_run_report(run: RunResult, out_dir: Union[str, Path]) -> list[str]:
    """Write per-orbit JSON, summary/count CSVs and certificate sidecars.

    Raises ReportError carrying the files already written if anything fails.
    """
    out = Path(out_dir)
    written: list[str] = []
    try:
        for record in run.records:
            text = json.dumps(record_to_dict(record), indent=2, sort_keys=True) + "\n"
            _write(out / "orbits" / f"{record.canonical}.json", text, written)
            deciding = deciding_result(record)
            if deciding is not None and deciding.verdict == "contradiction":
                _write(out / "certificates" / f"{record.canonical}.txt", certificate_sidecar(record), written)
        _write(out / "summary.csv",
               _csv_text(["canonical", "pattern", "orbit_size", "label", "stage"], summary_rows(run.records)),
               written)
        _write(out / "counts.csv", _csv_text(["label", "orbits", "patterns"], count_rows(run.records)), written)
    except (OSError, ValueError) as e:
        raise ReportError(f"report incomplete: {e}", written) from e
    log.info("wrote %d report files to %s", len(written), out)
    return written


def wstudy_text(rows: Sequence[WStudyRow]) -> str:
    return _csv_text(
        ["mu", "nu", "status", "v_star", "v_star_float", "low", "high"],
        [[r.mu, r.nu, r.status, r.v_star, f"{float(r.v_star):.6f}", r.low, r.high] for r in rows],
    )


def write_wstudy(rows: Sequence[WStudyRow], out_dir: Union[str, Path]) -> list[str]:
    written: list[str] = []
    try:
        _write(Path(out_dir) / "wstudy.csv", wstudy_text(rows), written)
    except OSError as e:
        raise ReportError(f"report incomplete: {e}", written) from e
    return written
