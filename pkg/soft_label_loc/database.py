"""SQLite index of runs, epoch histories, evaluation rows and sweep rows."""
import json
import sqlite3
from datetime import datetime
from typing import Dict, List, Optional, Sequence


class ResultsDatabase:
    """SQLite store for experiment results.

    Artifacts on disk are the reproducible payload; this database carries
    timestamps and is only an index over them.
    """

    def __init__(self, db_path: str = "results.db"):
        self.conn = sqlite3.connect(db_path, check_same_thread=False)
        self.conn.row_factory = sqlite3.Row
        self.cursor = self.conn.cursor()
        self._create_schema()

    def __enter__(self) -> "ResultsDatabase":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _create_schema(self):
        """Create database tables."""
        self.cursor.executescript("""
            CREATE TABLE IF NOT EXISTS runs (
                id TEXT PRIMARY KEY,
                command TEXT NOT NULL,
                strategy TEXT,
                seed INTEGER,
                config TEXT,
                created_at TEXT
            );
            CREATE TABLE IF NOT EXISTS epoch_history (
                run_id TEXT NOT NULL,
                epoch INTEGER NOT NULL,
                strategy TEXT,
                loss REAL,
                train_acc REAL,
                alpha_d REAL,
                valid_mae REAL,
                valid_acc REAL,
                PRIMARY KEY (run_id, epoch, strategy)
            );
            CREATE TABLE IF NOT EXISTS eval_rows (
                run_id TEXT NOT NULL,
                strategy TEXT,
                room TEXT NOT NULL,
                count INTEGER,
                mae REAL,
                acc REAL,
                ub_mae REAL,
                learning_error REAL
            );
            CREATE TABLE IF NOT EXISTS sweep_rows (
                run_id TEXT NOT NULL,
                param TEXT NOT NULL,
                value REAL NOT NULL,
                strategy TEXT,
                mae REAL,
                acc REAL
            );
        """)
        self.conn.commit()

    def create_run(self, run_id: str, command: str, strategy: Optional[str] = None,
                   seed: Optional[int] = None, config: Optional[Dict] = None) -> None:
        """Register a run; re-running the same command on the same run id replaces it."""
        self.cursor.execute("""
            INSERT OR REPLACE INTO runs VALUES (?, ?, ?, ?, ?, ?)
        """, (
            run_id, command, strategy, seed,
            json.dumps(config or {}, sort_keys=True),
            datetime.now().isoformat(),
        ))
        self.conn.commit()

    def get_run(self, run_id: str) -> Optional[Dict]:
        self.cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        row = self.cursor.fetchone()
        if row:
            run = dict(row)
            run["config"] = json.loads(run.get("config") or "{}")
            return run
        return None

    def list_runs(self) -> List[Dict]:
        self.cursor.execute("SELECT id, command, strategy, seed, created_at FROM runs ORDER BY created_at")
        return [dict(row) for row in self.cursor.fetchall()]

    def record_epoch(self, run_id: str, record) -> None:
        """Store one EpochRecord (later writes of the same epoch overwrite)."""
        self.cursor.execute("""
            INSERT OR REPLACE INTO epoch_history VALUES (?, ?, ?, ?, ?, ?, ?, ?)
        """, (
            run_id, record.epoch, record.strategy, record.loss, record.train_acc,
            record.alpha_d, record.valid_mae, record.valid_acc,
        ))
        self.conn.commit()

    def get_history(self, run_id: str, strategy: Optional[str] = None) -> List[Dict]:
        query = "SELECT * FROM epoch_history WHERE run_id = ?"
        params: List = [run_id]
        if strategy is not None:
            query += " AND strategy = ?"
            params.append(strategy)
        self.cursor.execute(query + " ORDER BY strategy, epoch", params)
        return [dict(row) for row in self.cursor.fetchall()]

    def record_eval(self, run_id: str, report) -> None:
        """Store every row of an EvalReport, replacing earlier rows for the same strategy."""
        self.cursor.execute("DELETE FROM eval_rows WHERE run_id = ? AND strategy = ?", (run_id, report.strategy))
        for metrics in [*report.rooms, report.aggregate]:
            room = "average" if metrics.room is None else str(metrics.room)
            self.cursor.execute("""
                INSERT INTO eval_rows VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """, (
                run_id, report.strategy, room, metrics.count, metrics.mae,
                metrics.acc, metrics.ub_mae, metrics.learning_error,
            ))
        self.conn.commit()

    def get_eval_rows(self, run_id: str, strategy: Optional[str] = None) -> List[Dict]:
        query = "SELECT * FROM eval_rows WHERE run_id = ?"
        params: List = [run_id]
        if strategy is not None:
            query += " AND strategy = ?"
            params.append(strategy)
        self.cursor.execute(query + " ORDER BY rowid", params)
        return [dict(row) for row in self.cursor.fetchall()]

    def record_sweep(self, run_id: str, param: str, rows: Sequence) -> None:
        self.cursor.execute("DELETE FROM sweep_rows WHERE run_id = ? AND param = ?", (run_id, param))
        self.cursor.executemany(
            "INSERT INTO sweep_rows VALUES (?, ?, ?, ?, ?, ?)",
            [(run_id, param, row.value, row.strategy.value, row.mae, row.acc) for row in rows],
        )
        self.conn.commit()

    def get_sweep(self, run_id: str, param: str) -> List[Dict]:
        self.cursor.execute(
            "SELECT value, strategy, mae, acc FROM sweep_rows WHERE run_id = ? AND param = ? ORDER BY value",
            (run_id, param),
        )
        return [dict(row) for row in self.cursor.fetchall()]

    def close(self):
        """Close database connection."""
        self.conn.close()
