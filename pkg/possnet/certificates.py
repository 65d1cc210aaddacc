"""
Possibilistic certificates and the polynomial inequalities they imply.

A certificate says: whenever the antecedent event happens in the inflation,
one of the consequent events happens too. Every consequent is impossible for
the refuted pattern while the antecedent is possible. Through the union bound
it turns into  sum_i M_Ei - M_T >= 0  over base-scenario monomials.
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .config import SET_COVER_EXACT_LIMIT
from .encodings import encode_local
from .errors import CertificateError
from .inflation import Constraint, ConstraintSystem, CopyEvent
from .models import RelaxationParams
from .possibility import Contradiction
from .sat import solve
from .scenario import (
    Distribution,
    Monomial,
    Pattern,
    Scenario,
    Valuation,
    _parse_outcomes,
    evaluate_monomial,
)

log = logging.getLogger(__name__)

Term = tuple[Fraction, Monomial]


# --- Set cover ---

def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def exact_cover(universe: int, sets: Sequence[int]) -> Optional[tuple[int, ...]]:
    """Smallest (then lexicographically first) index tuple whose sets cover `universe`.

    Branches on the candidates containing the lowest uncovered element and
    prunes any branch that cannot beat the best cover found so far.
    """
    best: Optional[tuple[int, ...]] = None

    def search(uncovered: int, chosen: tuple[int, ...]) -> None:
        nonlocal best
        if not uncovered:
            pick = tuple(sorted(chosen))
            if best is None or (len(pick), pick) < (len(best), best):
                best = pick
            return
        if best is not None and len(chosen) + 1 > len(best):
            return
        element = uncovered & -uncovered
        for i, s in enumerate(sets):
            if s & element and i not in chosen:
                search(uncovered & ~s, chosen + (i,))

    search(universe, ())
    return best


def minimum_covers(universe: int, sets: Sequence[int]) -> list[tuple[int, ...]]:
    """Every smallest index tuple covering `universe`, in lexicographic order."""
    found: set[tuple[int, ...]] = set()
    size: Optional[int] = None

    def search(uncovered: int, chosen: tuple[int, ...]) -> None:
        nonlocal size
        if not uncovered:
            if size is None or len(chosen) < size:
                size = len(chosen)
                found.clear()
            if len(chosen) == size:
                found.add(tuple(sorted(chosen)))
            return
        if size is not None and len(chosen) >= size:
            return
        element = uncovered & -uncovered
        for i, s in enumerate(sets):
            if s & element and i not in chosen:
                search(uncovered & ~s, chosen + (i,))

    search(universe, ())
    return sorted(found)


def greedy_cover(universe: int, sets: Sequence[int]) -> Optional[tuple[int, ...]]:
    """Largest-gain greedy cover followed by removal of redundant sets."""
    uncovered, chosen = universe, []
    while uncovered:
        gains = [bin(s & uncovered).count("1") for s in sets]
        i = max(range(len(sets)), key=lambda k: (gains[k], -k), default=None)
        if i is None or gains[i] == 0:
            return None
        chosen.append(i)
        uncovered &= ~sets[i]
    for i in sorted(chosen, key=lambda k: -k):
        rest = [k for k in chosen if k != i]
        union = 0
        for k in rest:
            union |= sets[k]
        if universe & ~union == 0:
            chosen = rest
    return tuple(sorted(chosen))


def minimum_cover(universe: int, sets: Sequence[int]) -> Optional[tuple[int, ...]]:
    if len(sets) <= SET_COVER_EXACT_LIMIT:
        return exact_cover(universe, sets)
    return greedy_cover(universe, sets)


# --- Certificates ---

@dataclass(frozen=True, eq=False)
class PossibilisticCertificate:
    system: ConstraintSystem
    antecedent: Constraint
    consequents: tuple[Union[Constraint, CopyEvent], ...]

    @property
    def inflation_name(self) -> str:
        return self.system.inflation.name

    def cover_holds(self) -> bool:
        union = 0
        for c in self.consequents:
            union |= self.system.mask(c)
        return self.system.mask(self.antecedent) & ~union == 0

    def cover_proof(self) -> list[tuple[tuple[int, ...], Constraint]]:
        """Each antecedent event with the first consequent containing it."""
        table = self.system.inflation.scenario.outcome_table
        masks = [self.system.mask(c) for c in self.consequents]
        proof = []
        for index in _bits(self.system.mask(self.antecedent)):
            owner = next((c for c, m in zip(self.consequents, masks) if m >> index & 1), None)
            if owner is None:
                raise CertificateError(f"antecedent event {index} is not covered")
            proof.append((tuple(int(o) for o in table[index]), owner))
        return proof


def merge_consequents(
    system: ConstraintSystem,
    consequents: Sequence[Union[Constraint, CopyEvent]],
    fixed: Iterable[int] = (),
) -> tuple[Union[Constraint, CopyEvent], ...]:
    """Sum out free copies: events that agree everywhere except on one copy
    outside `fixed`, and together take all its outcomes, become one event
    without that copy. Copies are tried in ascending order."""
    fixed = set(fixed)
    outcomes = system.inflation.outcomes
    items = [(c, dict(zip(system.members(c), c.outcomes))) for c in consequents]
    changed = True
    while changed:
        changed = False
        free = sorted({t for _, a in items for t in a} - fixed)
        for t in free:
            groups: dict[frozenset, list[int]] = {}
            for k, (_, a) in enumerate(items):
                if t in a and len(a) > 1:
                    rest = frozenset((u, o) for u, o in a.items() if u != t)
                    groups.setdefault(rest, []).append(k)
            full = next(
                (ks for ks in groups.values() if len({items[k][1][t] for k in ks}) == outcomes[t]),
                None,
            )
            if full is None:
                continue
            rest = {u: o for u, o in items[full[0]][1].items() if u != t}
            members = tuple(sorted(rest))
            merged = CopyEvent(members, tuple(rest[u] for u in members))
            items = [item for k, item in enumerate(items) if k not in full]
            items.insert(min(full), (merged, rest))
            changed = True
            break
    return tuple(c for c, _ in items)


def _cover_key(system: ConstraintSystem, merged, pick: tuple[int, ...]) -> tuple:
    # fewer merged events, then events on lower copies
    return (len(merged), sorted(system.members(c) for c in merged), pick)


def extract_certificate(contradiction: Contradiction) -> PossibilisticCertificate:
    """Smallest cover of the antecedent by impossible block constraints, with
    free copies summed out afterwards. Among covers of equal size the one
    leaving the fewest events after merging wins."""
    system = contradiction.system
    target = contradiction.antecedent_mask
    candidates = list(contradiction.covering)
    masks = [system.mask(c) & target for c in candidates]
    fixed = system.members(contradiction.violated)
    if len(masks) <= SET_COVER_EXACT_LIMIT:
        picks = minimum_covers(target, masks)
    else:
        picks = [p for p in (greedy_cover(target, masks),) if p is not None]
    if not picks:
        raise CertificateError(
            f"{system.inflation.name}: impossible constraints do not cover {system.name(contradiction.violated)}"
        )
    options = [
        (merge_consequents(system, [candidates[i] for i in pick], fixed), pick) for pick in picks
    ]
    consequents, pick = min(options, key=lambda o: _cover_key(system, o[0], o[1]))
    cert = PossibilisticCertificate(system, contradiction.violated, consequents)
    if not cert.cover_holds():
        raise CertificateError("extracted cover fails re-verification")
    log.debug("%s: %d consequents from a cover of size %d (%d candidates, %d minimum covers)",
              system.inflation.name, len(consequents), len(pick), len(candidates), len(picks))
    return cert


# --- Polynomial inequalities ---

def normalize_terms(terms: Iterable[Term]) -> tuple[Term, ...]:
    """Merge equal monomials, drop zeros, positives first then by monomial key."""
    merged: dict[Monomial, Fraction] = {}
    for coef, monomial in terms:
        merged[monomial] = merged.get(monomial, Fraction(0)) + Fraction(coef)
    kept = [(c, m) for m, c in merged.items() if c != 0]
    return tuple(sorted(kept, key=lambda t: (t[0] < 0, t[1].key)))


@dataclass(frozen=True)
class PolynomialInequality:
    """sum of coef * monomial >= 0 on the certified set."""

    scenario: Scenario
    terms: tuple[Term, ...]
    antecedent: Optional[Monomial] = None
    consequents: tuple[Monomial, ...] = ()
    source: Optional[str] = None  # inflation that produced it

    @property
    def degree(self) -> int:
        return max((m.degree for _, m in self.terms), default=0)

    @property
    def has_provenance(self) -> bool:
        return self.antecedent is not None

    def text(self) -> str:
        return _format_terms(self.scenario, self.terms) + " >= 0"

    def __str__(self) -> str:
        return self.text()


def _format_coef(coef: Fraction) -> str:
    return "" if coef == 1 else f"{coef} "


def _format_terms(scenario: Scenario, terms: Sequence[Term]) -> str:
    if not terms:
        return "0"
    parts = []
    for k, (coef, monomial) in enumerate(terms):
        body = _format_coef(abs(coef)) + monomial.label(scenario)
        if k == 0:
            parts.append(body if coef > 0 else f"-{body}")
        else:
            parts.append(("+ " if coef > 0 else "- ") + body)
    return " ".join(parts)


def to_inequality(certificate: PossibilisticCertificate) -> PolynomialInequality:
    system = certificate.system
    antecedent = system.monomial(certificate.antecedent)
    consequents = tuple(system.monomial(c) for c in certificate.consequents)
    terms = [(Fraction(1), m) for m in consequents] + [(Fraction(-1), antecedent)]
    return PolynomialInequality(
        system.inflation.base,
        normalize_terms(terms),
        antecedent,
        consequents,
        certificate.inflation_name,
    )


def evaluate(inequality: PolynomialInequality, distribution: Distribution) -> Fraction:
    if not isinstance(distribution, Distribution):
        raise CertificateError("inequalities evaluate on distributions; use evaluate_possibilistic for patterns")
    if distribution.scenario != inequality.scenario:
        raise CertificateError(
            f"inequality over {inequality.scenario.name}, distribution over {distribution.scenario.name}"
        )
    return sum((c * evaluate_monomial(distribution, m) for c, m in inequality.terms), Fraction(0))


# --- Independence relaxation ---

def _exponents(inequality: PolynomialInequality, exponent: str) -> dict[Monomial, int]:
    if exponent not in ("degree", "common"):
        raise ValueError(f"exponent must be 'degree' or 'common', got {exponent!r}")
    if not inequality.has_provenance:
        raise CertificateError("relaxation needs an inequality extracted from a certificate")
    monomials = (inequality.antecedent,) + inequality.consequents
    top = max(m.degree for m in monomials)
    return {m: (m.degree if exponent == "degree" else top) for m in monomials}


def relax(
    inequality: PolynomialInequality,
    params: RelaxationParams,
    exponent: str = "degree",
) -> PolynomialInequality:
    """eps2^d * sum_i M_Ei - eps1^d * M_T >= 0, valid for sources correlated within the bounds."""
    power = _exponents(inequality, exponent)
    terms = [(params.eps2 ** power[m], m) for m in inequality.consequents]
    terms.append((-(params.eps1 ** power[inequality.antecedent]), inequality.antecedent))
    return PolynomialInequality(
        inequality.scenario,
        normalize_terms(terms),
        inequality.antecedent,
        inequality.consequents,
        inequality.source,
    )


def _symbol(name: str, power: int) -> str:
    return name if power == 1 else f"({name})^{power}"


def symbolic_relaxation(inequality: PolynomialInequality, exponent: str = "degree") -> str:
    """Relaxed form with symbolic bounds, e.g. "(e1)^2 P_A(0) P_C(1) <= e2 [P_AB(01) + P_BC(01)]"."""
    power = _exponents(inequality, exponent)
    scenario = inequality.scenario
    left = f"{_symbol('e1', power[inequality.antecedent])} {inequality.antecedent.label(scenario)}"
    groups: dict[int, list[Term]] = {}
    for coef, m in normalize_terms((1, m) for m in inequality.consequents):
        groups.setdefault(power[m], []).append((coef, m))
    right = " + ".join(
        f"{_symbol('e2', d)} [{_format_terms(scenario, groups[d])}]" for d in sorted(groups)
    )
    return f"{left} <= {right}"


# --- Parsing ---

_FACTOR = re.compile(r"P_(\{[^}]*\}|\w+)\(([^)]*)\)")
_COEF = re.compile(r"^(\d+(?:/\d+)?)\s*")


def _parse_factor(scenario: Scenario, party: str, outcomes: str) -> Valuation:
    if party.startswith("{"):
        names = party[1:-1].split()
    else:
        names = list(party)
    observers = [scenario.observer_index(n) for n in names]
    values = _parse_outcomes(outcomes, len(observers))
    return Valuation.of(dict(zip(observers, values)))


def _parse_term(scenario: Scenario, text: str) -> Term:
    text = text.strip()
    coef = Fraction(1)
    found = _COEF.match(text)
    if found:
        coef = Fraction(found.group(1))
        text = text[found.end():]
    factors = _FACTOR.findall(text)
    if not factors or _FACTOR.sub("", text).strip():
        raise CertificateError(f"cannot parse term {text!r}")
    return coef, Monomial(tuple(_parse_factor(scenario, p, o) for p, o in factors))


def parse_inequality(scenario: Scenario, text: str) -> PolynomialInequality:
    """Inverse of PolynomialInequality.text()."""
    body, sep, rhs = text.partition(">=")
    if not sep or rhs.strip() != "0":
        raise CertificateError(f"expected '<polynomial> >= 0', got {text!r}")
    body = body.strip()
    if not body.startswith("-"):
        body = "+" + body
    # names, outcomes and coefficients never contain a sign
    pieces = re.split(r"([+-])", body)[1:]
    terms = []
    for sign, chunk in zip(pieces[0::2], pieces[1::2]):
        try:
            coef, monomial = _parse_term(scenario, chunk)
        except (ValueError, ZeroDivisionError) as exc:
            raise CertificateError(f"cannot parse {chunk.strip()!r}: {exc}") from exc
        terms.append((coef if sign == "+" else -coef, monomial))
    if not terms:
        raise CertificateError(f"no terms in {text!r}")
    return PolynomialInequality(scenario, normalize_terms(terms))


# --- Reports ---

def certificate_text(certificate: PossibilisticCertificate) -> str:
    system = certificate.system
    names = system.inflation.scenario.observers
    proof = certificate.cover_proof()
    lines = [
        f"inflation: {certificate.inflation_name}",
        f"antecedent: {system.name(certificate.antecedent)}",
        "consequents:",
        *(f"  {system.name(c)}" for c in certificate.consequents),
        f"cover: {len(proof)} antecedent events",
        *(
            f"  {' '.join(f'{n}={o}' for n, o in zip(names, event))} <- {system.name(owner)}"
            for event, owner in proof
        ),
        f"inequality: {to_inequality(certificate).text()}",
    ]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class InvarianceReport:
    plain_digest: str
    relaxed_digest: str
    status: str  # solver status of the shared instance

    @property
    def identical(self) -> bool:
        return self.plain_digest == self.relaxed_digest


def check_relaxed_locality_invariance(
    pattern: Pattern,
    alphabets: Sequence[int],
    params: Optional[RelaxationParams] = None,
    max_conflicts: Optional[int] = None,
) -> InvarianceReport:
    """Encode with and without source correlations and compare the CNFs."""
    params = params or RelaxationParams(Fraction(1, 2), Fraction(2))
    plain = encode_local(pattern, alphabets)
    relaxed = encode_local(pattern, alphabets, relaxation=params)
    report = InvarianceReport(plain.digest(), relaxed.digest(), solve(plain, max_conflicts).status)
    if not report.identical:
        log.warning("relaxed encoding of %s differs from the plain one", pattern.literal)
    return report


def with_provenance(inequality: PolynomialInequality) -> PolynomialInequality:
    """Read antecedent/consequent roles off a union-bound shaped inequality.

    The shape is unit positive terms and a single -1 term.
    """
    if inequality.has_provenance:
        return inequality
    negative = [m for c, m in inequality.terms if c < 0]
    positive = [(c, m) for c, m in inequality.terms if c > 0]
    if len(negative) != 1 or any(c != -1 for c, _ in inequality.terms if c < 0) or any(c != 1 for c, _ in positive):
        raise CertificateError(f"not of the form sum M_E - M_T >= 0: {inequality.text()}")
    return PolynomialInequality(
        inequality.scenario,
        inequality.terms,
        negative[0],
        tuple(m for _, m in positive),
        inequality.source,
    )
