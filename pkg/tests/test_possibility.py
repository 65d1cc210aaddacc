import pytest

from possnet.encodings import encode_inflation, encode_local
from possnet.errors import PatternError
from possnet.fixtures import hardy_square_pattern, pr_box_square_pattern, triangle_inequalities
from possnet.inflation import build_inflation, constraint_system
from possnet.possibility import (
    Consistent,
    Contradiction,
    check_factorization,
    evaluate_possibilistic,
    hypothesis_mask,
    independent_pairs,
    propagate_and_refute,
    violated_constraints,
)
from possnet.sat import solve
from possnet.scenario import Distribution, Pattern
from possnet.symmetry import partition_into_orbits


def refute(scenario, name, pattern, **kwargs):
    return propagate_and_refute(constraint_system(build_inflation(scenario, name), pattern), **kwargs)


def test_cut_refutes_ghz(tri, ghz):
    found = refute(tri, "cut", ghz)
    assert isinstance(found, Contradiction)
    assert found.to_dict() == {
        "inflation": "cut",
        "violated": "P_{A1 C1}(01) = OK",
        "covering": ["P_{A1 B1}(01) = NOPE", "P_{B1 C1}(01) = NOPE"],
    }
    assert found.covers()
    assert hypothesis_mask(found) == 0b10000001


@pytest.mark.parametrize("name", ["P2", "P3", "P4"])
def test_ring_refutes(tri, patterns, name):
    found = refute(tri, "ring:6", patterns[name])
    assert isinstance(found, Contradiction)
    assert found.covers()


def test_p5_needs_the_spiral(tri, patterns):
    assert isinstance(refute(tri, "ring:6", patterns["P5"]), Consistent)
    found = refute(tri, "spiral", patterns["P5"])
    assert isinstance(found, Contradiction)
    assert found.covers()


def test_local_patterns_are_consistent(tri, patterns):
    for name in ("P_all", "P_111"):
        for inflation in ("cut", "ring:6", "spiral"):
            assert isinstance(refute(tri, inflation, patterns[name]), Consistent)


def test_fixpoint_does_not_change_verdicts(tri):
    for orbit in partition_into_orbits(tri):
        plain = refute(tri, "ring:6", orbit.representative)
        repeated = refute(tri, "ring:6", orbit.representative, fixpoint=True)
        assert type(plain) is type(repeated)
        if isinstance(repeated, Consistent):
            assert repeated.passes <= 2


def test_refutation_needs_a_pattern(tri):
    system = constraint_system(build_inflation(tri, "cut"), Distribution.uniform(tri))
    with pytest.raises(PatternError):
        propagate_and_refute(system)


def test_refuted_orbits_have_no_small_local_model(tri):
    for orbit in partition_into_orbits(tri):
        pattern = orbit.representative
        if isinstance(refute(tri, "ring:6", pattern), Contradiction):
            assert solve(encode_local(pattern, (2, 2, 2))).unsat


def test_independent_pairs(tri, sq):
    assert independent_pairs(tri) == []
    assert independent_pairs(sq) == [(0, 2), (1, 3)]


def test_factorization(sq):
    found = check_factorization(Pattern.from_literal(sq, "[0000]+[1010]"))
    assert not found.passed
    assert found.pair == (0, 2)
    assert found.outcomes == (0, 1)
    assert check_factorization(hardy_square_pattern()).passed
    assert check_factorization(pr_box_square_pattern()).passed


def test_factorization_rejects_linked_pairs(sq):
    with pytest.raises(PatternError, match="share a source"):
        check_factorization(hardy_square_pattern(), [(0, 1)])


def test_evaluate_possibilistic(patterns, ghz):
    cut = triangle_inequalities()["cut"]
    assert not evaluate_possibilistic(cut, ghz)
    assert evaluate_possibilistic(cut, patterns["P_all"])
    assert evaluate_possibilistic(cut, patterns["P_111"])
    assert not evaluate_possibilistic(triangle_inequalities()["I5"], patterns["P5"])


@pytest.mark.parametrize("length", [9, pytest.param(12, marks=pytest.mark.slow)])
def test_p5_consistent_on_longer_rings(tri, patterns, length):
    assert isinstance(refute(tri, f"ring:{length}", patterns["P5"]), Consistent)


@pytest.mark.slow
def test_square_refutations_agree_with_sat(sq):
    orbits = partition_into_orbits(sq)
    for orbit in orbits[:: len(orbits) // 50][:50]:
        pattern = orbit.representative
        if isinstance(refute(sq, "ring:8", pattern), Contradiction):
            assert solve(encode_local(pattern, (2, 2, 2, 2))).unsat


def test_ring_antecedent_has_fewest_factors(tri, patterns):
    found = refute(tri, "ring:6", patterns["P2"])
    assert found.to_dict()["violated"] == "P_{A1 A2 B1 B2}(0110) = OK"
    assert len(found.covering) == 6


def test_violated_constraints_are_unreachable(tri, patterns):
    system = constraint_system(build_inflation(tri, "ring:6"), patterns["P2"])
    found = propagate_and_refute(system)
    alive = found.hypothesis.reshape(system.inflation.outcomes)
    missing = violated_constraints(system, alive)
    assert found.violated in missing
    for c in missing:
        assert not (system.region(c) & alive).any()


@pytest.mark.parametrize("inflation", ["cut", "ring:6", "spiral"])
def test_inflation_cnf_agrees_with_propagation(tri, inflation):
    built = build_inflation(tri, inflation)
    for orbit in partition_into_orbits(tri):
        pattern = orbit.representative
        refuted = isinstance(propagate_and_refute(constraint_system(built, pattern)), Contradiction)
        assert solve(encode_inflation(built, pattern)).unsat == refuted


def test_square_inflation_cnf_agrees_on_a_sample(sq):
    ring = build_inflation(sq, "ring:8")
    orbits = partition_into_orbits(sq)
    for orbit in orbits[:: len(orbits) // 8][:8]:
        pattern = orbit.representative
        refuted = isinstance(propagate_and_refute(constraint_system(ring, pattern)), Contradiction)
        assert solve(encode_inflation(ring, pattern)).unsat == refuted


def test_copy_symmetries_only_add_refutations(tri):
    ring = build_inflation(tri, "ring:6")
    for orbit in partition_into_orbits(tri):
        pattern = orbit.representative
        if solve(encode_inflation(ring, pattern)).unsat:
            assert solve(encode_inflation(ring, pattern, symmetric=True)).unsat
