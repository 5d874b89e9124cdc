from __future__ import annotations

import json
import time

from soctriage.config import AppConfig
from soctriage.ingest import generate_corpus
from soctriage.pipeline import run_pipeline
from soctriage.resolution import generate_tickets


def test_two_runs_byte_identical(tmp_path):
    events = generate_corpus(60, 0.4, seed=21)
    tickets = generate_tickets(8, seed=22)
    paths = []
    for name in ("one", "two"):
        result = run_pipeline(events, tickets, AppConfig())
        summary_path, _ = result.write(tmp_path / name)
        paths.append(summary_path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_all_stage_counts_populated(tmp_path):
    events = generate_corpus(60, 0.4, seed=23)
    tickets = generate_tickets(6, seed=24)
    result = run_pipeline(events, tickets, AppConfig())
    summary = result.summary
    assert summary["events_in"] == 60
    assert summary["detection"]["count"] > 0
    assert "report" in summary["detection"]
    assert len(summary["queue"]) > 0
    assert len(summary["queries"]) > 0
    assert summary["resolution"]["count"] == 6
    assert summary["judge"]["mean"] > 0
    assert summary["errors"] == []


def test_zero_critical_detections_is_not_an_error():
    # All-benign, low-magnitude corpus: the mock trio votes non-critical.
    events = generate_corpus(30, 0.0, seed=25)
    for event in events:
        event.magnitude = 0.5
        event.message = "routine heartbeat"
    result = run_pipeline(events, [], AppConfig())
    assert result.summary["queue"] == []
    assert result.summary["queries"] == []
    assert result.summary["resolution"]["count"] == 0
    assert result.summary["errors"] == []


def test_per_incident_latency_under_budget():
    events = generate_corpus(40, 0.4, seed=26)
    tickets = generate_tickets(5, seed=27)
    start = time.perf_counter()
    result = run_pipeline(events, tickets, AppConfig())
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    assert result.timing["per_incident_s"]["mean"] < 5.0


def test_summary_json_is_sorted_and_loadable(tmp_path):
    events = generate_corpus(20, 0.5, seed=28)
    result = run_pipeline(events, generate_tickets(3, seed=29), AppConfig())
    summary_path, timing_path = result.write(tmp_path)
    loaded = json.loads(summary_path.read_text())
    assert loaded == result.summary
    timing = json.loads(timing_path.read_text())
    assert "per_incident_s" in timing
