"""File-backed append-only persistence with crash-consistent replay.

One JSON-lines log per record family under a root directory; appends are
flushed and fsynced before the caller's API response returns. Reload replays
the logs; a corrupt line is quarantined with its location and loading
continues. API-visible state is a pure function of the logs.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import UsageError

LOG_NAMES = ("events", "verdicts", "queries", "tickets", "resolutions", "decisions", "reports")


@dataclass(frozen=True)
class QuarantinedRecord:
    log: str
    line_no: int
    raw: str


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.quarantined: list[QuarantinedRecord] = []
        self._records: dict[str, list[dict[str, Any]]] = {name: [] for name in LOG_NAMES}
        self._locks = {name: threading.Lock() for name in LOG_NAMES}
        self._replay()

    def _log_path(self, log: str) -> Path:
        if log not in LOG_NAMES:
            raise UsageError(f"unknown log {log!r}")
        return self.root / f"{log}.jsonl"

    def _replay(self) -> None:
        for log in LOG_NAMES:
            path = self._log_path(log)
            if not path.exists():
                continue
            with open(path, "r", encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        if not isinstance(record, dict):
                            raise ValueError("record is not an object")
                    except ValueError:
                        self.quarantined.append(QuarantinedRecord(log=log, line_no=line_no, raw=line))
                        continue
                    self._records[log].append(record)

    def append(self, log: str, record: dict[str, Any]) -> None:
        """Durable append: the record is on disk before this returns."""
        path = self._log_path(log)
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._locks[log]:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._records[log].append(record)

    def records(self, log: str) -> list[dict[str, Any]]:
        if log not in LOG_NAMES:
            raise UsageError(f"unknown log {log!r}")
        return list(self._records[log])

    def snapshot_manifest(self) -> dict[str, Any]:
        manifest = {
            "version": 1,
            "counts": {log: len(self._records[log]) for log in LOG_NAMES},
            "quarantined": len(self.quarantined),
        }
        (self.root / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        return manifest


@dataclass
class ServiceState:
    """Replay-derived API state. Decision records are applied in log order, so
    rebuilding from the same logs always reproduces the same state."""

    events: dict[str, dict] = field(default_factory=dict)
    verdicts: dict[str, dict] = field(default_factory=dict)
    queries: dict[str, dict] = field(default_factory=dict)
    tickets: dict[str, dict] = field(default_factory=dict)
    resolutions: dict[str, list[dict]] = field(default_factory=dict)
    decisions: list[dict] = field(default_factory=list)
    reports: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def replay(cls, store: Store) -> "ServiceState":
        state = cls()
        for record in store.records("events"):
            state.events[record["id"]] = record
        for record in store.records("verdicts"):
            state.verdicts[record["event_id"]] = record
        for record in store.records("queries"):
            state.queries[record["query_id"]] = record
        for record in store.records("tickets"):
            state.tickets[record["ticket_id"]] = record
        for record in store.records("resolutions"):
            state.resolutions.setdefault(record["ticket_id"], []).append(record)
        for record in store.records("reports"):
            state.reports[record["run_id"]] = record
        for record in store.records("decisions"):
            state.apply_decision(record)
        return state

    def apply_decision(self, decision: dict) -> None:
        self.decisions.append(decision)
        subject_id = decision["subject_id"]
        action = decision["action"]
        if decision["subject_kind"] == "query" and subject_id in self.queries:
            query = self.queries[subject_id]
            if action == "edit":
                query["query_text"] = decision["payload"]["query_text"]
                query["validation"] = decision["payload"]["validation"]
            query["decision"] = action
        elif decision["subject_kind"] == "ticket" and subject_id in self.resolutions:
            latest = self.resolutions[subject_id][-1]
            if action == "override_code":
                latest["override_code"] = decision["payload"]["code"]
            latest["decision"] = action
