"""
Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 run finished with budget-limited orbits.
"""

import argparse
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence, Union

from .certificates import certificate_text, extract_certificate, relax, symbolic_relaxation, with_provenance
from .config import DB_PATH, LOG_FORMAT, W_GRID, W_TOLERANCE
from .db import init_db
from .encodings import encode_local
from .errors import PossnetError
from .fixtures import resolve_fixture, triangle_inequalities
from .inflation import constraint_system, resolve_inflation
from .lp import build_ns_lp, farkas_to_inequality, minimum_threshold, solve_feasibility, w_threshold_study
from .models import PipelineConfig, RelaxationParams
from .pipeline import classify
from .possibility import Contradiction, propagate_and_refute
from .report import wstudy_text, write_run_report, write_wstudy
from .sat import export_dimacs
from .scenario import Distribution, Pattern, resolve_scenario
from .symmetry import partition_into_orbits

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2


def read_vector(text: str, scenario_name: str) -> Union[Pattern, Distribution]:
    """A pattern literal ("[011]+[100]"), a bitstring, or a fixture name."""
    text = text.strip()
    if text.startswith("["):
        return Pattern.from_literal(resolve_scenario(scenario_name), text)
    if text and set(text) <= {"0", "1"}:
        return Pattern.from_bitstring(resolve_scenario(scenario_name), text)
    return resolve_fixture(text)


# --- Subcommands ---

def cmd_classify(args: argparse.Namespace) -> int:
    config = PipelineConfig(
        scenario=args.scenario,
        stages=tuple(args.stages.split(",")) if args.stages else (),
        jobs=args.jobs,
        out_dir=args.out,
        resume=args.resume,
        max_conflicts=args.max_conflicts,
        time_limit=args.time_limit,
        node_budget=args.node_budget,
        symmetric_only=args.symmetric_only,
    )
    conn = init_db(args.db) if args.resume or args.db else None
    try:
        run = classify(config, conn)
    finally:
        if conn is not None:
            conn.close()
    if config.out_dir:
        write_run_report(run, config.out_dir)
    for label, count in run.counts.items():
        print(f"{label}\t{count}")
    if run.partial:
        log.warning("some orbits stayed unknown because of budgets or errors")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    vector = read_vector(args.pattern, args.scenario)
    inflation = resolve_inflation(vector.scenario, args.inflation)
    if isinstance(vector, Distribution):
        lp = build_ns_lp(inflation, vector)
        result = solve_feasibility(lp)
        if result.infeasible:
            print(f"infeasible on {inflation.name} after {result.pivots} pivots")
            print(farkas_to_inequality(result.farkas, lp).text())
        else:
            print(f"{result.status} on {inflation.name} after {result.pivots} pivots")
        return EXIT_PARTIAL if result.status == "budget" else EXIT_OK
    found = propagate_and_refute(constraint_system(inflation, vector))
    if isinstance(found, Contradiction):
        print(certificate_text(extract_certificate(found)), end="")
    else:
        print(f"consistent with {inflation.name}")
    return EXIT_OK


def cmd_wstudy(args: argparse.Namespace) -> int:
    rows = w_threshold_study(args.grid, Fraction(args.tol), args.inflation, args.jobs)
    if args.out:
        write_wstudy(rows, args.out)
    else:
        print(wstudy_text(rows), end="")
    print(f"minimum v* = {float(minimum_threshold(rows)):.6f}")
    return EXIT_OK


def cmd_fixture(args: argparse.Namespace) -> int:
    vector = resolve_fixture(args.name)
    if isinstance(vector, Pattern):
        print(vector.literal)
    else:
        for index, value in enumerate(vector.values):
            events = "".join(map(str, vector.scenario.outcome_tuple(index)))
            print(f"{events}\t{value}")
    return EXIT_OK


def cmd_orbits(args: argparse.Namespace) -> int:
    scenario = resolve_scenario(args.scenario)
    for orbit in partition_into_orbits(scenario, args.symmetric_only):
        print(f"{orbit.bitstring}\t{orbit.size}\t{orbit.representative.literal}")
    return EXIT_OK


def cmd_dimacs(args: argparse.Namespace) -> int:
    vector = read_vector(args.pattern, args.scenario)
    if not isinstance(vector, Pattern):
        raise ValueError("dimacs export needs a pattern")
    alphabets = (args.alphabet,) * len(vector.scenario.sources)
    print(export_dimacs(encode_local(vector, alphabets)), end="")
    return EXIT_OK


def cmd_relax(args: argparse.Namespace) -> int:
    known = triangle_inequalities()
    if args.inequality not in known:
        raise ValueError(f"unknown inequality {args.inequality!r}; known: {', '.join(known)}")
    inequality = with_provenance(known[args.inequality])
    print(symbolic_relaxation(inequality, args.exponent))
    params = RelaxationParams(Fraction(args.eps1), Fraction(args.eps2))
    print(relax(inequality, params, args.exponent).text())
    return EXIT_OK


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="possnet", description="Possibilistic classification of network scenarios.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify every orbit of a scenario")
    p.add_argument("--scenario", default="triangle", help="built-in name or JSON file")
    p.add_argument("--stages", help="comma-separated stages, e.g. sat-local@2,ring@6")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="report directory")
    p.add_argument("--resume", action="store_true", help="reuse cached stage results")
    p.add_argument("--db", help=f"stage cache file (default {DB_PATH} with --resume)")
    p.add_argument("--max-conflicts", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--node-budget", type=int)
    p.add_argument("--symmetric-only", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("certify", help="refute a pattern or distribution with one inflation")
    p.add_argument("--pattern", required=True, help="literal, bitstring or fixture name")
    p.add_argument("--inflation", required=True, help="cut, spiral, ring@L, web@n or a JSON file")
    p.add_argument("--scenario", default="triangle")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("wstudy", help="visibility thresholds over the W simplex")
    p.add_argument("--grid", type=int, default=W_GRID)
    p.add_argument("--tol", default=str(W_TOLERANCE))
    p.add_argument("--inflation", default="ring:6")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_wstudy)

    p = sub.add_parser("fixture", help="print a named pattern or distribution")
    p.add_argument("name")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("orbits", help="list orbit representatives")
    p.add_argument("--scenario", default="triangle")
    p.add_argument("--symmetric-only", action="store_true")
    p.set_defaults(func=cmd_orbits)

    p = sub.add_parser("dimacs", help="export the local-model CNF")
    p.add_argument("--pattern", required=True)
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--scenario", default="triangle")
    p.set_defaults(func=cmd_dimacs)

    p = sub.add_parser("relax", help="relax a known inequality for correlated sources")
    p.add_argument("--inequality", default="cut")
    p.add_argument("--eps1", default="1")
    p.add_argument("--eps2", default="1")
    p.add_argument("--exponent", choices=("degree", "common"), default="degree")
    p.set_defaults(func=cmd_relax)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format=LOG_FORMAT)
    try:
        return args.func(args)
    except (PossnetError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
