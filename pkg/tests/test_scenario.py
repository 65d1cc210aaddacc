import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from possnet.errors import DistributionError, PatternError, ScenarioError
from possnet.scenario import (
    Distribution,
    Monomial,
    Pattern,
    Valuation,
    collapse,
    collapse_scalar,
    enumerate_patterns,
    evaluate_monomial,
    load_scenario,
    marginalize,
    probability_label,
    realizations_sample,
    resolve_scenario,
    validate_scenario,
)
from tests.conftest import triangle_distributions

fractions = st.fractions(min_value=0, max_value=10)


def test_triangle_shape(tri):
    assert tri.observers == ("A", "B", "C")
    assert tri.size == 8
    assert [tri.sources[s] for s in tri.parents(0)] == ["beta", "gamma"]
    assert tri.share_source(0, 1)


def test_square_shape(sq):
    assert sq.size == 16
    assert not sq.share_source(0, 2)
    assert not sq.share_source(1, 3)
    assert sq.share_source(0, 1)


def test_joint_index_bijection(tri):
    for index in range(tri.size):
        assert tri.joint_index(tri.outcome_tuple(index)) == index
    assert tri.outcome_tuple(3) == (0, 1, 1)
    assert tri.joint_index((1, 0, 0)) == 4


def test_validate_scenario_errors():
    base = {"sources": ["s"], "observers": {"A": 2, "B": 2}, "edges": [["s", "A"], ["s", "B"]]}
    assert validate_scenario(base).size == 4
    with pytest.raises(ScenarioError, match="orphan"):
        validate_scenario({**base, "edges": [["s", "A"]]})
    with pytest.raises(ScenarioError, match="at least 2 outcomes"):
        validate_scenario({**base, "observers": {"A": 1, "B": 2}})
    with pytest.raises(ScenarioError, match="unknown source"):
        validate_scenario({**base, "edges": [["t", "A"], ["s", "B"]]})
    with pytest.raises(ScenarioError, match="duplicate edge"):
        validate_scenario({**base, "edges": [["s", "A"], ["s", "A"], ["s", "B"]]})
    with pytest.raises(ScenarioError, match="no observers"):
        validate_scenario({"sources": ["s"], "observers": {}, "edges": []})


def test_load_scenario_round_trip(tri, tmp_path):
    path = tmp_path / "tri.json"
    path.write_text(json.dumps(tri.to_description()))
    assert load_scenario(path) == tri
    assert resolve_scenario(str(path)) == tri
    with pytest.raises(ScenarioError):
        resolve_scenario("no-such-scenario")


def test_pattern_literal_and_bits(tri):
    p2 = Pattern.from_literal(tri, "[011]+[100]")
    assert p2.bitstring == "00011000"
    assert p2.code == 24
    assert p2.support() == [(0, 1, 1), (1, 0, 0)]
    assert p2.literal == "[011]+[100]"
    assert Pattern.from_bitstring(tri, p2.bitstring) == p2
    assert p2.support_size == 2
    assert not Pattern.from_literal(tri, "0").is_normalized


def test_pattern_errors(tri):
    with pytest.raises(PatternError):
        Pattern.from_literal(tri, "[01]")
    with pytest.raises(PatternError):
        Pattern.from_literal(tri, "[012]")
    with pytest.raises(PatternError):
        Pattern.from_bitstring(tri, "0101")
    with pytest.raises(PatternError):
        Pattern(tri, 256)


def test_enumerate_patterns_is_normalized(tri):
    codes = [p.code for p in enumerate_patterns(tri)]
    assert len(codes) == 255
    assert codes[0] == 1 and codes[-1] == 255


def test_pattern_marginal(tri):
    p2 = Pattern.from_literal(tri, "[011]+[100]")
    assert marginalize(p2, ["A"]).tolist() == [True, True]
    assert marginalize(p2, ["A", "B"]).tolist() == [False, True, True, False]


def test_distribution_validation(tri):
    with pytest.raises(DistributionError, match="sum"):
        Distribution(tri, (Fraction(1, 2),) * 8)
    with pytest.raises(DistributionError, match="negative"):
        Distribution(tri, (Fraction(-1),) + (Fraction(2, 7),) * 7)
    with pytest.raises(DistributionError, match="expected 8"):
        Distribution(tri, (Fraction(1),))
    assert Distribution.from_values(tri, [0.5, 0, 0, 0, 0, 0, 0, 0.5])[(1, 1, 1)] == Fraction(1, 2)


def test_collapse_uniform(tri):
    assert collapse(Distribution.uniform(tri)).code == 255


@given(fractions, fractions)
def test_collapse_is_a_semiring_morphism(a, b):
    assert collapse_scalar(a + b) == (collapse_scalar(a) or collapse_scalar(b))
    assert collapse_scalar(a * b) == (collapse_scalar(a) and collapse_scalar(b))


@settings(deadline=None)
@given(triangle_distributions(), st.sampled_from([("A",), ("B", "C"), ("A", "C"), ("A", "B", "C")]))
def test_marginalize_commutes_with_collapse(dist, observers):
    direct = [collapse_scalar(v) for v in marginalize(dist, observers)]
    assert direct == marginalize(collapse(dist), observers).tolist()


def test_realizations_have_the_pattern_support(patterns):
    for pattern in patterns.values():
        assert collapse(realizations_sample(pattern)) == pattern
        assert collapse(realizations_sample(pattern, seed=7)) == pattern


def test_realization_weights_checked(patterns):
    p2 = patterns["P2"]
    good = [0, 0, 0, 1, 3, 0, 0, 0]
    assert realizations_sample(p2, weights=good).values[4] == Fraction(3, 4)
    with pytest.raises(DistributionError):
        realizations_sample(p2, weights=[1, 0, 0, 1, 3, 0, 0, 0])


def test_labels(tri):
    assert probability_label(["A", "C"], (0, 1)) == "P_AC(01)"
    assert probability_label(["A1", "C1"], (0, 1)) == "P_{A1 C1}(01)"
    m = Monomial((Valuation.of({2: 1}), Valuation.of({0: 0})))
    assert m.label(tri) == "P_A(0) P_C(1)"
    assert m.degree == 2


def test_evaluate_monomial(tri, patterns):
    m = Monomial((Valuation.of({0: 0}), Valuation.of({2: 1})))
    assert evaluate_monomial(Distribution.uniform(tri), m) == Fraction(1, 4)
    assert evaluate_monomial(patterns["P2"], m) is True
    joint = Monomial((Valuation.of({0: 1, 1: 1, 2: 1}),))
    assert evaluate_monomial(patterns["P2"], joint) is False


def test_valuation_out_of_range(tri):
    with pytest.raises(ScenarioError):
        evaluate_monomial(Distribution.uniform(tri), Monomial((Valuation.of({0: 2}),)))
