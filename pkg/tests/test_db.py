import pytest

from possnet.db import cached_count, init_db, load_stage_result, save_stage_result
from possnet.models import StageResult


@pytest.fixture
def conn(tmp_path):
    conn = init_db(str(tmp_path / "cache.db"))
    yield conn
    conn.close()


def test_save_and_load(conn):
    result = StageResult("ring@6", "contradiction", {"inflation": "ring:6", "nonsignaling": True})
    save_stage_result(conn, "triangle", "00011000", result)
    assert load_stage_result(conn, "triangle", "00011000", "ring@6") == result
    assert load_stage_result(conn, "triangle", "00011000", "spiral") is None
    assert cached_count(conn, "triangle") == 1
    assert cached_count(conn, "square") == 0


def test_replace_keeps_one_row(conn):
    save_stage_result(conn, "triangle", "1", StageResult("sat-local@2", "no-model", {"conflicts": 3}))
    save_stage_result(conn, "triangle", "1", StageResult("sat-local@2", "no-model", {"conflicts": 4}))
    assert cached_count(conn, "triangle") == 1
    assert load_stage_result(conn, "triangle", "1", "sat-local@2").witness == {"conflicts": 4}


def test_budget_and_error_not_cached(conn):
    save_stage_result(conn, "triangle", "1", StageResult("sat-local@6", "budget"))
    save_stage_result(conn, "triangle", "1", StageResult("ring@6", "error", error="boom"))
    assert cached_count(conn, "triangle") == 0


def test_unreadable_witness(conn):
    conn.execute(
        "INSERT INTO stage_results VALUES (?, ?, ?, ?, ?, ?)",
        ("triangle", "1", "spiral", "consistent", "{not json", None),
    )
    assert load_stage_result(conn, "triangle", "1", "spiral") is None


def test_reopen_keeps_rows(tmp_path):
    path = str(tmp_path / "cache.db")
    first = init_db(path)
    save_stage_result(first, "square", "1", StageResult("factorization", "pass"))
    first.close()
    second = init_db(path)
    assert cached_count(second, "square") == 1
    second.close()
