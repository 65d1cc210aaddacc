from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from possnet.certificates import (
    certificate_text,
    check_relaxed_locality_invariance,
    evaluate,
    exact_cover,
    extract_certificate,
    greedy_cover,
    merge_consequents,
    minimum_cover,
    minimum_covers,
    normalize_terms,
    parse_inequality,
    relax,
    symbolic_relaxation,
    to_inequality,
    with_provenance,
)
from possnet.errors import CertificateError
from possnet.fixtures import (
    TRIANGLE_INEQUALITIES,
    ghz_family,
    hardy_square_pattern,
    triangle_fixtures,
    triangle_inequalities,
    w_family,
)
from possnet.inflation import Constraint, CopyEvent, build_inflation, constraint_system
from possnet.models import GhzFamilyPoint, RelaxationParams, WFamilyPoint
from possnet.possibility import evaluate_possibilistic, propagate_and_refute
from possnet.scenario import Distribution, realizations_sample
from possnet.symmetry import partition_into_orbits
from tests.conftest import product_distributions

CUT = TRIANGLE_INEQUALITIES["cut"]


def certificate_for(scenario, inflation, pattern):
    return extract_certificate(propagate_and_refute(constraint_system(build_inflation(scenario, inflation), pattern)))


# --- Set cover ---

def test_exact_cover():
    assert exact_cover(0b111, [0b011, 0b110, 0b100, 0b001]) == (0, 1)
    assert exact_cover(0b11, [0b01, 0b10, 0b01]) == (0, 1)
    assert exact_cover(0b111, [0b111, 0b011]) == (0,)
    assert exact_cover(0b100, [0b011]) is None


def test_greedy_cover_drops_redundant_sets():
    assert greedy_cover(0b111111, [0b111000, 0b000111, 0b110110]) == (0, 1)
    assert greedy_cover(0b100, [0b011]) is None


def test_minimum_cover_falls_back_to_greedy():
    sets = [1 << i for i in range(24)]
    assert minimum_cover((1 << 24) - 1, sets) == tuple(range(24))


def test_minimum_covers_lists_every_tie():
    assert minimum_covers(0b111, [0b011, 0b110, 0b100, 0b001]) == [(0, 1), (0, 2), (1, 3)]
    assert minimum_covers(0b111, [0b011, 0b110, 0b100, 0b001, 0b111]) == [(4,)]
    assert minimum_covers(0b1000, [0b0001, 0b0110]) == []


# --- Certificates ---

def test_cut_certificate(tri, ghz):
    cert = certificate_for(tri, "cut", ghz)
    assert cert.inflation_name == "cut"
    assert cert.cover_holds()
    assert [cert.system.name(c) for c in cert.consequents] == [
        "P_{A1 B1}(01) = NOPE",
        "P_{B1 C1}(01) = NOPE",
    ]
    assert to_inequality(cert).text() == CUT
    assert len(cert.cover_proof()) == 2


def test_certificate_text(tri, ghz):
    lines = certificate_text(certificate_for(tri, "cut", ghz)).splitlines()
    assert lines[0] == "inflation: cut"
    assert lines[1] == "antecedent: P_{A1 C1}(01) = OK"
    assert "cover: 2 antecedent events" in lines
    assert "  A1=0 B1=0 C1=1 <- P_{B1 C1}(01) = NOPE" in lines
    assert lines[-1] == f"inequality: {CUT}"


def test_spiral_certificate_for_p5(tri, patterns):
    cert = certificate_for(tri, "spiral", patterns["P5"])
    assert to_inequality(cert).text() == TRIANGLE_INEQUALITIES["I5"]


def test_ring_certificate_for_p2(tri, patterns):
    cert = certificate_for(tri, "ring:6", patterns["P2"])
    inequality = to_inequality(cert)
    assert inequality.antecedent.label(tri) == "P_AB(01) P_AB(10)"
    assert inequality.source == "ring:6"
    assert inequality.text() == TRIANGLE_INEQUALITIES["I2"]
    assert cert.cover_holds()
    assert all(c.value is False for c in cert.consequents)


def test_ring_certificate_for_p4(tri, patterns):
    inequality = to_inequality(certificate_for(tri, "ring:6", patterns["P4"]))
    assert inequality.text() == TRIANGLE_INEQUALITIES["I4"]


def test_ring_certificate_for_p3_is_two_terms(tri, patterns):
    # two merged events already cover the antecedent, so the result is the
    # shorter inequality; the three-term one is still violated by P3
    inequality = to_inequality(certificate_for(tri, "ring:6", patterns["P3"]))
    assert inequality.text() == TRIANGLE_INEQUALITIES["I4"]
    assert not evaluate_possibilistic(triangle_inequalities()["I3"], patterns["P3"])


def test_merge_consequents_sums_out_free_copies(tri):
    system = constraint_system(build_inflation(tri, "ring:6"), triangle_fixtures()["P2"])
    # blocks over (A1 A2 C1 C2): assignments differing only in C2
    block = next(b for b, blk in enumerate(system.blocks) if blk.ai_set.members == (0, 1, 4, 5))
    pair = [Constraint(block, (0, 1, 1, 0), False), Constraint(block, (0, 1, 1, 1), False)]
    merged = merge_consequents(system, pair, fixed=(0, 1, 2, 3))
    assert merged == (CopyEvent((0, 1, 4), (0, 1, 1)),)
    assert system.monomial(merged[0]).label(tri) == "P_AC(11) P_A(0)"
    assert system.name(merged[0]) == "P_{A1 A2 C1}(011) = NOPE"
    # a fixed copy is never summed out
    assert merge_consequents(system, pair, fixed=(5,)) == tuple(pair)


# --- Inequalities ---

@pytest.mark.parametrize("name", sorted(TRIANGLE_INEQUALITIES))
def test_golden_text(tri, name):
    text = TRIANGLE_INEQUALITIES[name]
    assert parse_inequality(tri, text).text() == text


def test_evaluations(tri, patterns):
    known = triangle_inequalities()
    assert evaluate(known["cut"], Distribution.uniform(tri)) == Fraction(1, 4)
    assert evaluate(known["I2"], realizations_sample(patterns["P2"])) == Fraction(-1, 4)
    w = w_family(WFamilyPoint(Fraction(1, 3), Fraction(1, 3)))
    assert evaluate(known["I5"], w) == Fraction(-1, 27)


def test_evaluate_errors(tri, ghz):
    with pytest.raises(CertificateError):
        evaluate(triangle_inequalities()["cut"], ghz)
    with pytest.raises(CertificateError):
        evaluate(triangle_inequalities()["cut"], realizations_sample(hardy_square_pattern()))


@settings(deadline=None, max_examples=1000)
@given(product_distributions())
def test_inequalities_hold_for_products(dist):
    for inequality in triangle_inequalities().values():
        assert evaluate(inequality, dist) >= 0


@given(st.permutations(range(3)), st.integers(min_value=1, max_value=5))
def test_normal_form_ignores_term_order(order, scale):
    terms = triangle_inequalities()["cut"].terms
    shuffled = [(c * scale, m) for c, m in (terms[i] for i in order)]
    assert normalize_terms(shuffled) == tuple((c * scale, m) for c, m in terms)


def test_normal_form_merges_terms(tri):
    terms = parse_inequality(tri, "P_A(0) + P_A(0) - P_B(1) >= 0").terms
    assert len(terms) == 2
    assert terms[0][0] == 2
    assert parse_inequality(tri, "P_A(0) - P_A(0) + P_B(1) >= 0").text() == "P_B(1) >= 0"


@pytest.mark.parametrize("text", [
    "P_A(0)",
    "P_A(0) >= 1",
    "P_Z(0) >= 0",
    "P_A(01) >= 0",
    "foo >= 0",
    "1/0 P_A(0) >= 0",
    " >= 0",
])
def test_parse_errors(tri, text):
    with pytest.raises(CertificateError):
        parse_inequality(tri, text)


# --- Relaxation ---

def test_relax_cut(tri):
    cut = with_provenance(triangle_inequalities()["cut"])
    params = RelaxationParams(Fraction(9, 10), Fraction(11, 10))
    relaxed = relax(cut, params)
    assert relaxed.text() == "11/10 P_AB(01) + 11/10 P_BC(01) - 81/100 P_A(0) P_C(1) >= 0"
    assert evaluate(relaxed, ghz_family(GhzFamilyPoint(Fraction(1, 2)))) == Fraction(-81, 400)
    assert parse_inequality(tri, relaxed.text()).text() == relaxed.text()
    assert relax(cut, RelaxationParams()).terms == cut.terms


def test_symbolic_relaxation():
    cut = with_provenance(triangle_inequalities()["cut"])
    assert symbolic_relaxation(cut) == "(e1)^2 P_A(0) P_C(1) <= e2 [P_AB(01) + P_BC(01)]"
    assert symbolic_relaxation(cut, "common") == "(e1)^2 P_A(0) P_C(1) <= (e2)^2 [P_AB(01) + P_BC(01)]"


def test_common_exponent():
    cut = with_provenance(triangle_inequalities()["cut"])
    relaxed = relax(cut, RelaxationParams(1, 2), exponent="common")
    assert [c for c, _ in relaxed.terms] == [4, 4, -1]


def test_relaxation_errors():
    cut = triangle_inequalities()["cut"]
    with pytest.raises(CertificateError):
        relax(cut, RelaxationParams())
    with pytest.raises(ValueError):
        relax(with_provenance(cut), RelaxationParams(), exponent="square")
    with pytest.raises(ValueError):
        RelaxationParams(0, 1)
    with pytest.raises(ValueError):
        RelaxationParams(1, Fraction(1, 2))


def test_with_provenance(tri):
    i2 = with_provenance(triangle_inequalities()["I2"])
    assert i2.antecedent.label(tri) == "P_AB(01) P_AB(10)"
    assert len(i2.consequents) == 2
    with pytest.raises(CertificateError):
        with_provenance(parse_inequality(tri, "2 P_A(0) - P_B(0) >= 0"))
    with pytest.raises(CertificateError):
        with_provenance(parse_inequality(tri, "P_A(0) - P_B(0) - P_C(0) >= 0"))


def test_relaxed_locality_invariance(ghz, patterns):
    report = check_relaxed_locality_invariance(ghz, (2, 2, 2))
    assert report.identical
    assert report.status == "unsat"
    assert check_relaxed_locality_invariance(patterns["P1"], (2, 2, 2)).status == "sat"


def test_invariance_on_every_triangle_orbit(tri):
    for orbit in partition_into_orbits(tri):
        assert check_relaxed_locality_invariance(orbit.representative, (2, 2, 2)).identical
