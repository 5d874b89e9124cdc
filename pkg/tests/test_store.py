from __future__ import annotations

import json

import pytest

from soctriage.errors import UsageError
from soctriage.store import ServiceState, Store


class TestStore:
    def test_round_trip(self, tmp_path):
        store = Store(tmp_path)
        for i in range(5):
            store.append("events", {"id": f"e{i}", "n": i})
        reloaded = Store(tmp_path)
        assert reloaded.records("events") == store.records("events")
        assert len(reloaded.records("events")) == 5

    def test_truncated_final_line_quarantined(self, tmp_path):
        store = Store(tmp_path)
        for i in range(5):
            store.append("events", {"id": f"e{i}"})
        path = tmp_path / "events.jsonl"
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])  # cut into the final record only
        reloaded = Store(tmp_path)
        assert len(reloaded.quarantined) == 1
        assert reloaded.quarantined[0].log == "events"
        assert reloaded.quarantined[0].line_no == 5
        assert len(reloaded.records("events")) == 4

    def test_empty_store_empty_state(self, tmp_path):
        store = Store(tmp_path)
        assert all(store.records(log) == [] for log in ("events", "verdicts", "decisions"))
        state = ServiceState.replay(store)
        assert state.events == {} and state.decisions == []

    def test_unknown_log_rejected(self, tmp_path):
        store = Store(tmp_path)
        with pytest.raises(UsageError):
            store.append("nonexistent", {})

    def test_manifest_counts(self, tmp_path):
        store = Store(tmp_path)
        store.append("events", {"id": "e"})
        store.append("decisions", {"subject_kind": "query", "subject_id": "q", "action": "approve",
                                   "payload": {}, "actor": "a", "at": "now"})
        manifest = store.snapshot_manifest()
        assert manifest["counts"]["events"] == 1
        assert manifest["counts"]["decisions"] == 1
        assert json.loads((tmp_path / "manifest.json").read_text())["version"] == 1


class TestServiceState:
    def test_edit_decision_rewrites_query(self, tmp_path):
        store = Store(tmp_path)
        store.append("queries", {"query_id": "q-1", "platform": "qradar_aql",
                                 "query_text": "SELECT sourceip FROM events",
                                 "validation": {"passed": True, "violations": []}})
        store.append("decisions", {
            "subject_kind": "query", "subject_id": "q-1", "action": "edit",
            "payload": {"query_text": "SELECT destinationip FROM events",
                        "validation": {"passed": True, "violations": []}},
            "actor": "analyst", "at": "2024-01-01T00:00:00Z",
        })
        state = ServiceState.replay(store)
        assert state.queries["q-1"]["query_text"] == "SELECT destinationip FROM events"
        assert state.queries["q-1"]["decision"] == "edit"

    def test_override_decision_annotates_resolution(self, tmp_path):
        store = Store(tmp_path)
        store.append("resolutions", {"ticket_id": "t-1", "setting": "no_sqm",
                                     "output": {"code": "BenignPositive"}})
        store.append("decisions", {
            "subject_kind": "ticket", "subject_id": "t-1", "action": "override_code",
            "payload": {"code": "FalsePositive"}, "actor": "analyst", "at": "t",
        })
        state = ServiceState.replay(store)
        assert state.resolutions["t-1"][-1]["override_code"] == "FalsePositive"

    def test_replay_is_pure_function_of_logs(self, tmp_path):
        store = Store(tmp_path)
        store.append("events", {"id": "e1"})
        store.append("verdicts", {"event_id": "e1", "ensemble_label": True})
        a = ServiceState.replay(Store(tmp_path))
        b = ServiceState.replay(Store(tmp_path))
        assert a.events == b.events and a.verdicts == b.verdicts
