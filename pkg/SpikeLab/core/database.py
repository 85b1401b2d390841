import json
import logging
import sqlite3
from datetime import datetime, timezone

from ..config import DB_NAME

logger = logging.getLogger(__name__)


def init_db(db_name: str = DB_NAME) -> bool:
    conn = None
    try:
        conn = sqlite3.connect(db_name)
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                scenario TEXT NOT NULL,
                kind TEXT NOT NULL,
                status TEXT NOT NULL,
                output_dir TEXT,
                wall_time REAL,
                manifest TEXT,
                started_at TEXT NOT NULL
            )
        """)
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_scenario ON runs (scenario)")

        conn.commit()
        logger.info(f"Run ledger '{db_name}' initialized.")
        return True
    except sqlite3.Error as e:
        logger.error(f"SQLite error during run ledger initialization: {e}", exc_info=True)
        return False
    finally:
        if conn:
            conn.close()


def record_run(scenario: str, kind: str, status: str, output_dir: str | None, wall_time: float | None,
               manifest: dict | None = None, db_name: str = DB_NAME) -> int | None:
    started_at = datetime.now(timezone.utc).isoformat()
    try:
        with sqlite3.connect(db_name) as conn:
            cursor = conn.cursor()
            cursor.execute(
                """
                INSERT INTO runs (scenario, kind, status, output_dir, wall_time, manifest, started_at)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (scenario, kind, status, output_dir, wall_time,
                 json.dumps(manifest, sort_keys=True) if manifest is not None else None, started_at)
            )
            logger.info(f"Recorded run of '{scenario}' with status {status}.")
            return cursor.lastrowid
    except sqlite3.Error as e:
        logger.error(f"SQLite error recording run of '{scenario}': {e}", exc_info=True)
        return None


def _row_to_dict(row: tuple) -> dict:
    run_id, scenario, kind, status, output_dir, wall_time, manifest, started_at = row
    return {
        "id": run_id, "scenario": scenario, "kind": kind, "status": status, "output_dir": output_dir,
        "wall_time": wall_time, "manifest": json.loads(manifest) if manifest else None, "started_at": started_at,
    }


def get_recent_runs(limit: int = 10, db_name: str = DB_NAME) -> list[dict]:
    try:
        with sqlite3.connect(db_name) as conn:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT id, scenario, kind, status, output_dir, wall_time, manifest, started_at "
                "FROM runs ORDER BY id DESC LIMIT ?",
                (limit,)
            )
            return [_row_to_dict(row) for row in cursor.fetchall()]
    except sqlite3.Error as e:
        logger.error(f"SQLite error fetching recent runs: {e}", exc_info=True)
        return []


def get_run(run_id: int, db_name: str = DB_NAME) -> dict | None:
    try:
        with sqlite3.connect(db_name) as conn:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT id, scenario, kind, status, output_dir, wall_time, manifest, started_at FROM runs WHERE id = ?",
                (run_id,)
            )
            row = cursor.fetchone()
            return _row_to_dict(row) if row else None
    except sqlite3.Error as e:
        logger.error(f"SQLite error fetching run {run_id}: {e}", exc_info=True)
        return None
