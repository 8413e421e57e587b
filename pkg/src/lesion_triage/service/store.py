"""Single-file SQLite store backing the service.

Tables:
  submissions    one row per scan submission (questionnaire + result JSON)
  image_records  dataset manifest records mirrored for the review workflow
  review_audit   append-only log of expert verdicts

Writes are serialized behind one lock; the connection is shared across
request/worker threads. Submissions and verdicts survive restarts.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..errors import AlreadyReviewedError, NotAugmentedError, NotFoundError
from ..manifest import (
    Dataset,
    ImageRecord,
    Source,
    Verification,
    record_from_obj,
    record_to_obj,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS submissions (
    id TEXT PRIMARY KEY,
    image_sha TEXT NOT NULL,
    image_path TEXT NOT NULL,
    questionnaire TEXT NOT NULL,
    status TEXT NOT NULL,
    created_at TEXT NOT NULL,
    updated_at TEXT NOT NULL,
    result TEXT,
    saliency_path TEXT,
    error TEXT
);
CREATE TABLE IF NOT EXISTS image_records (
    id TEXT PRIMARY KEY,
    record TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS review_audit (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    record_id TEXT NOT NULL,
    verdict TEXT NOT NULL,
    reviewer TEXT NOT NULL,
    note TEXT NOT NULL,
    at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_submissions_created ON submissions (created_at);
"""


def utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class SubmissionRow:
    id: str
    image_sha: str
    image_path: str
    questionnaire: dict
    status: str
    created_at: str
    updated_at: str
    result: Optional[dict]
    saliency_path: Optional[str]
    error: Optional[str]


def _row_to_submission(row: sqlite3.Row) -> SubmissionRow:
    return SubmissionRow(
        id=row["id"],
        image_sha=row["image_sha"],
        image_path=row["image_path"],
        questionnaire=json.loads(row["questionnaire"]),
        status=row["status"],
        created_at=row["created_at"],
        updated_at=row["updated_at"],
        result=json.loads(row["result"]) if row["result"] else None,
        saliency_path=row["saliency_path"],
        error=row["error"],
    )


class Store:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # --- submissions -------------------------------------------------

    def add_submission(
        self,
        submission_id: str,
        image_sha: str,
        image_path: str,
        questionnaire: dict,
        created_at: Optional[str] = None,
    ) -> SubmissionRow:
        now = created_at or utcnow()
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO submissions (id, image_sha, image_path, questionnaire,"
                " status, created_at, updated_at) VALUES (?, ?, ?, ?, 'pending', ?, ?)",
                (submission_id, image_sha, image_path, json.dumps(questionnaire), now, now),
            )
        return self.get_submission(submission_id)

    def get_submission(self, submission_id: str) -> SubmissionRow:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM submissions WHERE id = ?", (submission_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"submission {submission_id!r} not found")
        return _row_to_submission(row)

    def set_classified(self, submission_id: str, result: dict, saliency_path: str) -> None:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE submissions SET status='classified', result=?,"
                " saliency_path=?, updated_at=? WHERE id=?",
                (json.dumps(result), saliency_path, utcnow(), submission_id),
            )
            if cur.rowcount == 0:
                raise NotFoundError(f"submission {submission_id!r} not found")

    def set_failed(self, submission_id: str, error: str) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE submissions SET status='failed', error=?, updated_at=? WHERE id=?",
                (error, utcnow(), submission_id),
            )

    def pending_submission_ids(self) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT id FROM submissions WHERE status='pending' ORDER BY created_at"
            ).fetchall()
        return [r["id"] for r in rows]

    def submissions_between(self, start: str, end: str) -> list[SubmissionRow]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM submissions WHERE created_at >= ? AND created_at <= ?"
                " ORDER BY created_at",
                (start, end),
            ).fetchall()
        return [_row_to_submission(r) for r in rows]

    def count_submissions(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM submissions").fetchone()[0]

    # --- image records / review ---------------------------------------

    def import_manifest(self, dataset: Dataset) -> int:
        with self._lock, self._conn:
            for rec in dataset.records:
                self._conn.execute(
                    "INSERT OR REPLACE INTO image_records (id, record) VALUES (?, ?)",
                    (rec.id, json.dumps(record_to_obj(rec))),
                )
        return len(dataset)

    def get_record(self, record_id: str) -> ImageRecord:
        with self._lock:
            row = self._conn.execute(
                "SELECT record FROM image_records WHERE id = ?", (record_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"record {record_id!r} not found")
        return record_from_obj(json.loads(row["record"]))

    def review_verdict(
        self, record_id: str, verdict: str, reviewer: str, note: str = ""
    ) -> ImageRecord:
        """Apply an expert verdict to an Unverified augmented record.

        The transition is one-way through this API; audit entries are
        append-only.
        """
        if verdict not in ("verified", "rejected"):
            raise ValueError(f"verdict must be 'verified' or 'rejected', got {verdict!r}")
        with self._lock, self._conn:
            rec = self.get_record(record_id)
            if rec.provenance.source is not Source.AUGMENTED:
                raise NotAugmentedError(f"record {record_id!r} is not augmented")
            if rec.verification is not Verification.UNVERIFIED:
                raise AlreadyReviewedError(f"record {record_id!r} already reviewed")
            obj = record_to_obj(rec)
            obj["verification"] = verdict
            self._conn.execute(
                "UPDATE image_records SET record=? WHERE id=?",
                (json.dumps(obj), record_id),
            )
            self._conn.execute(
                "INSERT INTO review_audit (record_id, verdict, reviewer, note, at)"
                " VALUES (?, ?, ?, ?, ?)",
                (record_id, verdict, reviewer, note, utcnow()),
            )
        return record_from_obj(obj)

    def review_queue(self, page: int = 1, per_page: int = 20) -> tuple[list[ImageRecord], int]:
        """Unverified augmented records, paginated; returns (items, total)."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT record FROM image_records ORDER BY id"
            ).fetchall()
        pending = []
        for row in rows:
            rec = record_from_obj(json.loads(row["record"]))
            if rec.provenance.source is Source.AUGMENTED and rec.verification is Verification.UNVERIFIED:
                pending.append(rec)
        start = (page - 1) * per_page
        return pending[start : start + per_page], len(pending)

    def audit_entries(self, record_id: str) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM review_audit WHERE record_id=? ORDER BY seq", (record_id,)
            ).fetchall()
        return [dict(r) for r in rows]

    def export_dataset(self) -> Dataset:
        with self._lock:
            rows = self._conn.execute("SELECT record FROM image_records ORDER BY id").fetchall()
        return Dataset([record_from_obj(json.loads(r["record"])) for r in rows])

    def training_eligible_count(self) -> int:
        return sum(1 for rec in self.export_dataset().records if rec.training_eligible)
