from itertools import product

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from possnet.sat import CnfInstance, export_dimacs, import_dimacs, luby, solve


def instance_of(num_vars, clauses):
    instance = CnfInstance()
    for _ in range(num_vars):
        instance.new_var()
    for clause in clauses:
        instance.add_clause(clause)
    return instance


def pigeonhole(pigeons, holes):
    instance = CnfInstance()
    x = {(p, h): instance.new_var(f"p{p}h{h}") for p in range(pigeons) for h in range(holes)}
    for p in range(pigeons):
        instance.add_clause(x[p, h] for h in range(holes))
    for h in range(holes):
        for p in range(pigeons):
            for q in range(p + 1, pigeons):
                instance.add_clause((-x[p, h], -x[q, h]))
    return instance


def brute_force(num_vars, clauses):
    for values in product((False, True), repeat=num_vars):
        if all(any(values[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            return True
    return False


def test_luby_prefix():
    assert [luby(i) for i in range(1, 16)] == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


def test_simple_instances():
    assert solve(instance_of(1, [(1,)])).model == {1: True}
    assert solve(instance_of(1, [(1,), (-1,)])).unsat
    assert solve(instance_of(2, [])).sat
    assert solve(instance_of(2, [()])).unsat
    assert solve(instance_of(2, [(1, -1)])).sat


def test_pigeonhole():
    assert solve(pigeonhole(4, 4)).sat
    result = solve(pigeonhole(5, 4))
    assert result.unsat
    assert result.stats.conflicts > 0


def test_conflict_budget():
    result = solve(pigeonhole(6, 5), max_conflicts=1)
    assert result.status == "budget"
    assert result.model is None


clauses = st.lists(
    st.lists(st.integers(min_value=1, max_value=6).flatmap(lambda v: st.sampled_from([v, -v])),
             min_size=1, max_size=3),
    max_size=24,
)


@settings(max_examples=1000, deadline=None)
@given(clauses)
def test_agrees_with_truth_tables(raw):
    instance = instance_of(6, raw)
    result = solve(instance)
    assert result.sat == brute_force(6, raw)
    if result.sat:
        assert all(any(result.model[abs(l)] == (l > 0) for l in c) for c in raw)


def test_add_clause_checks_variables():
    instance = instance_of(2, [])
    with pytest.raises(ValueError):
        instance.add_clause((3,))
    with pytest.raises(ValueError):
        instance.add_clause((0, 1))


def test_dimacs_round_trip():
    instance = pigeonhole(3, 2)
    text = export_dimacs(instance)
    assert "p cnf 6 9" in text
    assert "c 1 p0h0" in text
    back = import_dimacs(text)
    assert back.clauses == instance.clauses
    assert back.names == instance.names
    assert back.digest() == instance.digest()


def test_dimacs_edge_cases():
    text = "c plain comment\np cnf 3 2\n1 -2\n 0 3\n0\n%\n0\n"
    back = import_dimacs(text)
    assert back.num_vars == 3
    assert back.clauses == [(1, -2), (3,)]
    assert import_dimacs("p cnf 2 1\n1 2").clauses == [(1, 2)]
    with pytest.raises(ValueError):
        import_dimacs("p dnf 2 1\n1 0\n")


def test_digest_ignores_names():
    a = instance_of(2, [(1, 2)])
    b = CnfInstance()
    b.new_var("x")
    b.new_var("y")
    b.add_clause((1, 2))
    assert a.digest() == b.digest()
    assert a.digest() != instance_of(2, [(1, -2)]).digest()
