"""
Exact-rational feasibility LPs for nonsignaling inflations.

Each inflation joint outcome is one nonnegative variable. Rows fix the
marginal of every maximal AI-expressible set to the value the base
distribution predicts, plus one normalization row. Infeasibility comes with
Farkas multipliers read off the final phase-1 tableau, which turn into a
polynomial inequality over the base scenario.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .certificates import PolynomialInequality, normalize_terms
from .config import LP_MAX_PIVOTS, LP_MAX_VARIABLES, W_BORDER_OFFSET, W_GRID, W_TOLERANCE
from .errors import LpError
from .fixtures import w_family
from .inflation import ConstraintSystem, Inflation, block_ids, build_inflation, constraint_system
from .models import WFamilyPoint
from .scenario import Distribution, Monomial, Valuation, probability_label, triangle

log = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class LpRow:
    block: Optional[int]  # None for the normalization row
    outcomes: tuple[int, ...]
    rhs: Fraction


@dataclass(frozen=True, eq=False)
class RationalLp:
    system: ConstraintSystem
    rows: tuple[LpRow, ...]

    @property
    def inflation(self) -> Inflation:
        return self.system.inflation

    @property
    def num_vars(self) -> int:
        return self.inflation.size

    @cached_property
    def _ids(self) -> tuple[np.ndarray, ...]:
        return tuple(block_ids(self.inflation, b.ai_set) for b in self.system.blocks)

    def columns(self, r: int) -> np.ndarray:
        """Variables with coefficient 1 in row r (all others are 0)."""
        row = self.rows[r]
        if row.block is None:
            return np.arange(self.num_vars)
        shape = self.system.blocks[row.block].rhs.shape
        flat = int(np.ravel_multi_index(row.outcomes, shape))
        return np.flatnonzero(self._ids[row.block] == flat)

    def monomial(self, r: int) -> Optional[Monomial]:
        row = self.rows[r]
        if row.block is None:
            return None
        return self.system.blocks[row.block].ai_set.monomial(row.outcomes)

    def label(self, r: int) -> str:
        row = self.rows[r]
        if row.block is None:
            return f"sum = {row.rhs}"
        members = self.system.blocks[row.block].ai_set.members
        names = [self.inflation.observer_name(t) for t in members]
        return f"{probability_label(names, row.outcomes)} = {row.rhs}"


@dataclass(frozen=True)
class FarkasCertificate:
    """Multipliers y with y.A <= 0 componentwise and y.b > 0."""

    multipliers: tuple[Fraction, ...]


@dataclass
class LpResult:
    status: str  # "feasible", "infeasible" or "budget"
    point: Optional[tuple[Fraction, ...]] = None
    farkas: Optional[FarkasCertificate] = None
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"


def build_ns_lp(inflation: Inflation, distribution: Distribution) -> RationalLp:
    if not inflation.nonsignaling:
        raise LpError(f"{inflation.name} is not a nonsignaling inflation")
    if inflation.size > LP_MAX_VARIABLES:
        raise LpError(f"{inflation.name}: {inflation.size} variables exceeds the LP guard")
    if not isinstance(distribution, Distribution):
        raise LpError("the inflation LP needs an exact distribution")
    system = constraint_system(inflation, distribution)
    rows = [LpRow(None, (), ONE)]
    for b, block in enumerate(system.blocks):
        for outcomes in np.ndindex(*block.rhs.shape):
            rows.append(LpRow(b, tuple(int(o) for o in outcomes), Fraction(block.rhs[outcomes])))
    log.debug("%s LP: %d variables, %d rows", inflation.name, inflation.size, len(rows))
    return RationalLp(system, tuple(rows))


# --- Simplex ---

def _pivot(tableau: list[list[Fraction]], cost: list[Fraction], pr: int, col: int) -> None:
    piv = tableau[pr]
    scale = piv[col]
    if scale != 1:
        for j, v in enumerate(piv):
            if v:
                piv[j] = v / scale
    nonzero = [j for j, v in enumerate(piv) if v]
    for r, row in enumerate(tableau):
        f = row[col]
        if r != pr and f:
            for j in nonzero:
                row[j] -= f * piv[j]
    f = cost[col]
    if f:
        for j in nonzero:
            cost[j] -= f * piv[j]


def solve_feasibility(lp: RationalLp, max_pivots: Optional[int] = None) -> LpResult:
    """Phase-1 primal simplex over Fractions with Bland's rule.

    Artificial column n + r belongs to row r; the phase-1 objective is their sum.
    """
    max_pivots = LP_MAX_PIVOTS if max_pivots is None else max_pivots
    n, m = lp.num_vars, len(lp.rows)
    width = n + m + 1
    signs = [1 if row.rhs >= 0 else -1 for row in lp.rows]

    tableau = []
    for r, row in enumerate(lp.rows):
        line = [ZERO] * width
        for j in lp.columns(r):
            line[int(j)] = Fraction(signs[r])
        line[n + r] = ONE
        line[-1] = abs(row.rhs)
        tableau.append(line)
    basis = [n + r for r in range(m)]

    # reduced costs (zero on the basic artificials); cost[-1] holds minus the objective
    cost = [ZERO] * width
    for line in tableau:
        for j in range(n):
            if line[j]:
                cost[j] -= line[j]
        cost[-1] -= line[-1]

    pivots = 0
    while True:
        entering = next((j for j in range(n + m) if cost[j] < 0), None)
        if entering is None:
            break
        if pivots >= max_pivots:
            log.warning("%s LP: pivot budget of %d exhausted", lp.inflation.name, max_pivots)
            return LpResult("budget", pivots=pivots)
        leaving = None
        for r, line in enumerate(tableau):
            a = line[entering]
            if a > 0:
                ratio = line[-1] / a
                if leaving is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                    leaving, best = r, ratio
        if leaving is None:
            raise LpError("phase-1 objective unbounded")
        _pivot(tableau, cost, leaving, entering)
        basis[leaving] = entering
        pivots += 1

    if -cost[-1] > 0:
        y = tuple(signs[r] * (ONE - cost[n + r]) for r in range(m))
        return LpResult("infeasible", farkas=FarkasCertificate(y), pivots=pivots)
    point = [ZERO] * n
    for r, j in enumerate(basis):
        if j < n:
            point[j] = tableau[r][-1]
    return LpResult("feasible", point=tuple(point), pivots=pivots)


# --- Verification ---

def verify_point(lp: RationalLp, point: Sequence[Fraction]) -> bool:
    if len(point) != lp.num_vars or any(x < 0 for x in point):
        return False
    return all(
        sum((point[int(j)] for j in lp.columns(r)), ZERO) == row.rhs
        for r, row in enumerate(lp.rows)
    )


def verify_farkas(lp: RationalLp, certificate: FarkasCertificate) -> bool:
    y = certificate.multipliers
    if len(y) != len(lp.rows):
        return False
    combined = [ZERO] * lp.num_vars
    for r, weight in enumerate(y):
        if weight:
            for j in lp.columns(r):
                combined[int(j)] += weight
    if any(c > 0 for c in combined):
        return False
    return sum((w * row.rhs for w, row in zip(y, lp.rows)), ZERO) > 0


def farkas_to_inequality(certificate: FarkasCertificate, lp: RationalLp) -> PolynomialInequality:
    """-sum_r y_r M_r >= 0, with the normalization row's 1 written as sum_o P_X(o)."""
    if not verify_farkas(lp, certificate):
        raise LpError("Farkas certificate does not verify")
    base = lp.inflation.base
    terms: dict[Monomial, Fraction] = {}
    for r, weight in enumerate(certificate.multipliers):
        if not weight:
            continue
        monomial = lp.monomial(r)
        if monomial is None:
            for o in range(base.outcomes[0]):
                unit = Monomial((Valuation.of({0: o}),))
                terms[unit] = terms.get(unit, ZERO) - weight
        else:
            terms[monomial] = terms.get(monomial, ZERO) - weight

    terms = {m: c for m, c in terms.items() if c}
    if not terms:
        raise LpError("certificate reduces to the zero polynomial")
    scale = math.lcm(*(c.denominator for c in terms.values()))
    ints = {m: c * scale for m, c in terms.items()}
    common = math.gcd(*(int(c) for c in ints.values()))
    return PolynomialInequality(
        base,
        normalize_terms((c / common, m) for m, c in ints.items()),
        source=lp.inflation.name,
    )


# --- Visibility bisection ---

@dataclass
class BisectionResult:
    status: str  # "bracketed", "always-feasible" or "always-infeasible"
    v_star: Fraction
    low: Fraction   # last feasible visibility
    high: Fraction  # last infeasible visibility
    trials: list[tuple[Fraction, str]] = field(default_factory=list)


def _status_at(family: Callable[[Fraction], Distribution], inflation: Inflation, v: Fraction) -> str:
    result = solve_feasibility(build_ns_lp(inflation, family(v)))
    if result.status == "budget":
        raise LpError(f"{inflation.name} LP at v={v} ran out of pivots")
    return result.status


def visibility_bisection(
    family: Callable[[Fraction], Distribution],
    inflation: Inflation,
    tolerance: Fraction = W_TOLERANCE,
) -> BisectionResult:
    """Largest feasible visibility, to within `tolerance`.

    Feasible trials stay below `low`'s successor and infeasible ones above it.
    """
    tolerance = Fraction(tolerance)
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    trials = []
    top = _status_at(family, inflation, ONE)
    trials.append((ONE, top))
    if top == "feasible":
        return BisectionResult("always-feasible", ONE, ONE, ONE, trials)
    bottom = _status_at(family, inflation, ZERO)
    trials.append((ZERO, bottom))
    if bottom == "infeasible":
        return BisectionResult("always-infeasible", ZERO, ZERO, ZERO, trials)

    low, high = ZERO, ONE
    while high - low > 2 * tolerance:
        mid = (low + high) / 2
        status = _status_at(family, inflation, mid)
        trials.append((mid, status))
        if status == "feasible":
            low = mid
        else:
            high = mid
    v_star = (low + high) / 2
    log.info("%s: v* = %.5f in [%s, %s] after %d trials", inflation.name, v_star, low, high, len(trials))
    return BisectionResult("bracketed", v_star, low, high, trials)


# --- W-family threshold study ---

@dataclass(frozen=True)
class WStudyRow:
    mu: Fraction
    nu: Fraction
    status: str
    v_star: Fraction
    low: Fraction
    high: Fraction


def w_grid_points(grid: int = W_GRID, border_offset: Fraction = W_BORDER_OFFSET) -> list[tuple[Fraction, Fraction]]:
    """Interior barycentric grid plus points at `border_offset` from each simplex edge."""
    if grid < 3:
        raise ValueError("grid needs at least 3 subdivisions")
    points = {
        (Fraction(i, grid), Fraction(j, grid))
        for i in range(1, grid) for j in range(1, grid) if i + j < grid
    }
    for i in range(1, grid):
        t = Fraction(i, grid)
        for mu, nu in ((border_offset, t), (t, border_offset), (t, 1 - border_offset - t)):
            if mu > 0 and nu > 0 and mu + nu < 1:
                points.add((mu, nu))
    return sorted(points)


def _study_point(args: tuple) -> WStudyRow:
    mu, nu, tolerance, inflation_name = args
    inflation = build_inflation(triangle(), inflation_name)
    result = visibility_bisection(
        lambda v: w_family(WFamilyPoint(mu, nu, v)), inflation, tolerance
    )
    return WStudyRow(mu, nu, result.status, result.v_star, result.low, result.high)


def w_threshold_study(
    grid: int = W_GRID,
    tolerance: Fraction = W_TOLERANCE,
    inflation_name: str = "ring:6",
    jobs: int = 1,
    border_offset: Fraction = W_BORDER_OFFSET,
) -> list[WStudyRow]:
    """Bisected visibility thresholds over the W simplex, sorted by (mu, nu)."""
    tasks = [(mu, nu, Fraction(tolerance), inflation_name) for mu, nu in w_grid_points(grid, border_offset)]
    log.info("W study: %d points on %s", len(tasks), inflation_name)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_study_point, tasks))
    else:
        rows = [_study_point(t) for t in tasks]
    return sorted(rows, key=lambda r: (r.mu, r.nu))


def minimum_threshold(rows: Sequence[WStudyRow]) -> Fraction:
    """Visibility below which every studied point is feasible."""
    if not rows:
        raise ValueError("empty study")
    return min(r.v_star for r in rows)
