"""
SQLite stage-result cache used to resume classification runs.
"""

import json
import logging
import sqlite3
from typing import Optional

from .config import DB_PATH
from .models import StageResult

log = logging.getLogger(__name__)


def init_db(path: Optional[str] = None) -> sqlite3.Connection:
    """Connect to the cache and create the table if needed."""
    conn = sqlite3.connect(path or DB_PATH, check_same_thread=False)
    conn.row_factory = sqlite3.Row
    cursor = conn.cursor()

    cursor.execute("""
        CREATE TABLE IF NOT EXISTS stage_results(
            scenario TEXT NOT NULL,
            canonical TEXT NOT NULL,
            stage TEXT NOT NULL,
            verdict TEXT NOT NULL,
            witness TEXT NOT NULL,
            error TEXT,
            PRIMARY KEY (scenario, canonical, stage)
        )
    """)

    conn.commit()
    return conn


def load_stage_result(conn: sqlite3.Connection, scenario: str, canonical: str, stage: str) -> Optional[StageResult]:
    cursor = conn.cursor()
    cursor.execute(
        "SELECT * FROM stage_results WHERE scenario = ? AND canonical = ? AND stage = ?",
        (scenario, canonical, stage),
    )
    row = cursor.fetchone()
    if row is None:
        return None
    try:
        witness = json.loads(row["witness"])
    except json.JSONDecodeError:
        log.warning("unreadable cached witness for %s/%s/%s, recomputing", scenario, canonical, stage)
        return None
    return StageResult(row["stage"], row["verdict"], witness, row["error"])


def save_stage_result(conn: sqlite3.Connection, scenario: str, canonical: str, result: StageResult) -> None:
    """Budget and error outcomes are not cached, so a resumed run retries them."""
    if result.verdict in ("budget", "error"):
        return
    conn.execute(
        """
        INSERT OR REPLACE INTO stage_results (scenario, canonical, stage, verdict, witness, error)
        VALUES (?, ?, ?, ?, ?, ?)
        """,
        (scenario, canonical, result.stage, result.verdict,
         json.dumps(result.witness, sort_keys=True), result.error),
    )
    conn.commit()


def cached_count(conn: sqlite3.Connection, scenario: str) -> int:
    cursor = conn.cursor()
    cursor.execute("SELECT COUNT(*) FROM stage_results WHERE scenario = ?", (scenario,))
    return cursor.fetchone()[0]
