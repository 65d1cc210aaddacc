import pytest

from possnet.config import POSSIBLE_WORLDS_NODE_BUDGET
from possnet.encodings import (
    ResponseTables,
    _hidden_tuples,
    decode_and_verify_local,
    encode_inflation,
    encode_local,
    possible_worlds_decide,
)
from possnet.errors import EncodingError, PatternError
from possnet.fixtures import hardy_square_pattern, pr_box_square_pattern
from possnet.inflation import build_inflation
from possnet.models import RelaxationParams
from possnet.sat import solve
from possnet.scenario import Pattern
from possnet.symmetry import orbit_of, partition_into_orbits

BINARY = (2, 2, 2)


def local_tables(pattern, alphabets=BINARY):
    result = solve(encode_local(pattern, alphabets))
    assert result.sat
    return decode_and_verify_local(result.model, pattern, alphabets)


@pytest.mark.parametrize("name", ["P_all", "P_111", "P1"])
def test_local_patterns(patterns, name):
    tables = local_tables(patterns[name])
    assert tables.generate() == patterns[name]
    again = ResponseTables.from_dict(tables.scenario, tables.to_dict())
    assert again.generate() == patterns[name]


@pytest.mark.parametrize("name", ["P2", "P3", "P4", "P5"])
def test_nonlocal_patterns_unsat(patterns, name):
    assert solve(encode_local(patterns[name], BINARY)).unsat


def test_ghz_unsat(ghz):
    assert solve(encode_local(ghz, BINARY)).unsat


def test_variable_names(patterns):
    instance = encode_local(patterns["P_111"], (1, 1, 1))
    assert instance.names[1] == "P_A(0|beta=0,gamma=0)"
    assert solve(instance).sat


def test_encode_local_errors(patterns):
    with pytest.raises(PatternError):
        encode_local(patterns["P1"], (2, 2))
    with pytest.raises(PatternError):
        encode_local(patterns["P1"], (2, 0, 2))


def test_decode_rejects_a_foreign_model(patterns):
    result = solve(encode_local(patterns["P_111"], BINARY))
    with pytest.raises(EncodingError):
        decode_and_verify_local(result.model, patterns["P_all"], BINARY)


def test_worlds_cover_the_support(patterns):
    tables = local_tables(patterns["P1"])
    seen = set()
    for world in tables.worlds():
        seen |= world.outcomes()
    assert seen == set(patterns["P1"].support())
    assert len(list(tables.worlds(limit=1))) == 1


def test_relaxed_sources_keep_the_same_cnf(patterns):
    for pattern in patterns.values():
        plain = encode_local(pattern, BINARY)
        relaxed = encode_local(pattern, BINARY, RelaxationParams("1/2", 2))
        assert plain.digest() == relaxed.digest()


def test_relaxation_keeps_the_source_support(patterns):
    skewed = [["1/3", "2/3"], ["1/2", "1/2"], ["1/5", "4/5"]]
    for pattern in patterns.values():
        plain = encode_local(pattern, BINARY, marginals=skewed)
        relaxed = encode_local(pattern, BINARY, RelaxationParams("1/10", 3), marginals=skewed)
        assert plain.digest() == relaxed.digest()


def test_zero_weight_source_values_drop_out(patterns):
    hidden = _hidden_tuples(BINARY, RelaxationParams("1/2", 2), [[1, 0], ["1/2", "1/2"], ["1/2", "1/2"]])
    assert hidden == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]
    frozen = [[1, 0]] * 3
    assert len(patterns["P1"].support()) > 1
    assert solve(encode_local(patterns["P1"], BINARY, marginals=frozen)).unsat
    assert solve(encode_local(patterns["P_111"], BINARY, marginals=frozen)).sat
    with pytest.raises(PatternError):
        encode_local(patterns["P1"], BINARY, marginals=[[1, 0]])


def test_possible_worlds_local(patterns):
    result = possible_worlds_decide(patterns["P1"], 2)
    assert result.status == "local"
    assert result.tables.generate() == patterns["P1"]
    assert possible_worlds_decide(patterns["P_111"], 1).status == "local"


def test_possible_worlds_conclusive(ghz, patterns):
    result = possible_worlds_decide(ghz, 2)
    assert result.status == "not-local"
    assert result.conclusive
    small = possible_worlds_decide(patterns["P5"], 2)
    assert small.status == "not-local"
    assert not small.conclusive


def test_possible_worlds_budget(patterns):
    assert possible_worlds_decide(patterns["P5"], 3, budget=5).status == "budget"


def test_possible_worlds_errors(tri, patterns):
    with pytest.raises(PatternError):
        possible_worlds_decide(patterns["P1"], 0)
    with pytest.raises(PatternError):
        possible_worlds_decide(Pattern(tri, 0), 2)


def test_encode_inflation(tri, ghz, patterns):
    cut = build_inflation(tri, "cut")
    instance = encode_inflation(cut, ghz)
    assert instance.num_vars == cut.size
    assert instance.names[1] == "P_{A1 B1 C1}(000)"
    assert solve(instance).unsat
    assert solve(encode_inflation(cut, patterns["P_all"])).sat


def test_square_fixtures_unsat_with_binary_sources():
    for pattern in (hardy_square_pattern(), pr_box_square_pattern()):
        assert solve(encode_local(pattern, (2, 2, 2, 2))).unsat


def test_hardy_square_is_local_with_ternary_sources():
    hardy = hardy_square_pattern()
    result = possible_worlds_decide(hardy, 3)
    assert result.status == "local"
    assert result.tables.generate() == hardy
    assert max(result.tables.alphabets) == 3


def test_pr_square_is_not_local_at_three():
    result = possible_worlds_decide(pr_box_square_pattern(), 3)
    assert result.status == "not-local"
    assert not result.conclusive
    assert result.nodes <= POSSIBLE_WORLDS_NODE_BUDGET


@pytest.mark.slow
def test_square_fixtures_with_ternary_sources():
    hardy = hardy_square_pattern()
    result = solve(encode_local(hardy, (3, 3, 3, 3)))
    assert result.sat
    assert decode_and_verify_local(result.model, hardy, (3, 3, 3, 3)).generate() == hardy
    assert solve(encode_local(pr_box_square_pattern(), (3, 3, 3, 3))).unsat


def test_sat_and_world_search_agree_on_triangle_orbits(tri):
    for orbit in partition_into_orbits(tri):
        pattern = orbit.representative
        worlds = possible_worlds_decide(pattern, 2)
        assert worlds.status != "budget"
        assert solve(encode_local(pattern, BINARY)).sat == (worlds.status == "local"), pattern.bitstring


def test_local_verdict_is_the_same_across_an_orbit(tri):
    for orbit in partition_into_orbits(tri):
        verdict = solve(encode_local(orbit.representative, BINARY)).sat
        members = orbit_of(orbit.representative).members
        for code in members[-3:]:
            assert solve(encode_local(Pattern(tri, code), BINARY)).sat == verdict


@pytest.mark.parametrize("k", [1, 2])
def test_locality_is_monotone_in_source_alphabet(tri, k):
    for orbit in partition_into_orbits(tri):
        if possible_worlds_decide(orbit.representative, k).status == "local":
            assert possible_worlds_decide(orbit.representative, k + 1).status == "local"
