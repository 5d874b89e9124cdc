from __future__ import annotations

import csv
import json

from soctriage.cli import main
from soctriage.ingest import load_events


def test_simulate_then_detect_then_eval(tmp_path, capsys):
    sim = tmp_path / "sim"
    assert main(["simulate", "--events", "30", "--tickets", "4", "--seed", "3",
                 "--out", str(sim)]) == 0
    assert len(load_events(sim / "corpus.jsonl")) == 30

    verdicts = tmp_path / "verdicts.jsonl"
    queue_csv = tmp_path / "queue.csv"
    assert main(["detect", "--input", str(sim / "corpus.jsonl"),
                 "--out", str(verdicts), "--queue", str(queue_csv)]) == 0
    rows = list(csv.DictReader(queue_csv.read_text().splitlines()))
    assert rows and set(rows[0]) == {"event_id", "risk_score", "ensemble_label"}

    assert main(["eval", "--task", "detect", "--input", str(verdicts),
                 "--truth", str(sim / "corpus.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "accuracy:" in out


def test_ingest_csv_corpus(tmp_path):
    source = tmp_path / "raw.csv"
    source.write_text(
        "id,timestamp,magnitude,message,vendor\n"
        "e1,2024-01-01T00:00:00Z,8,failed login,acme\n"
        "e2,2024-01-01T01:00:00Z,2,heartbeat,acme\n",
        encoding="utf-8",
    )
    out = tmp_path / "clean.jsonl"
    features = tmp_path / "features.json"
    assert main(["ingest", "--input", str(source), "--out", str(out),
                 "--features", str(features)]) == 0
    assert len(load_events(out)) == 2
    matrix = json.loads(features.read_text())
    assert len(matrix["rows"]) == 2


def test_genquery_exit_codes(capsys):
    assert main(["genquery", "--platform", "qradar_aql",
                 "--question", "Find sources with many failed logins in the last day"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["validation"]["passed"] is True


def test_resolve_with_and_without_ensemble(tmp_path, capsys):
    sim = tmp_path / "sim"
    main(["simulate", "--events", "10", "--tickets", "3", "--seed", "9", "--out", str(sim)])
    capsys.readouterr()
    assert main(["resolve", "--ticket", "tkt-0001",
                 "--tickets", str(sim / "tickets.jsonl"), "--ensemble"]) == 0
    output = json.loads(capsys.readouterr().out)
    assert set(output) == {"code", "justification", "actions"}


def test_pipeline_command_writes_artifacts(tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--events", "25", "--tickets", "3", "--seed", "5", "--out", str(sim)])
    out = tmp_path / "run"
    assert main(["pipeline", "--events", str(sim / "corpus.jsonl"),
                 "--tickets", str(sim / "tickets.jsonl"), "--out", str(out),
                 "--store", str(tmp_path / "store"), "--run-id", "r1"]) == 0
    assert (out / "summary.json").exists()
    assert (out / "timing.json").exists()
    from soctriage.store import Store

    assert Store(tmp_path / "store").records("reports")[0]["run_id"] == "r1"


def test_config_file_round_trip(tmp_path):
    config_path = tmp_path / "app.toml"
    config_path.write_text(
        'platform = "secops_yaral"\nquery_top_n = 2\n\n[preprocess]\nembed_dim = 16\n',
        encoding="utf-8",
    )
    from soctriage.config import AppConfig

    cfg = AppConfig.load(config_path)
    assert cfg.platform == "secops_yaral"
    assert cfg.query_top_n == 2
    assert cfg.preprocess.embed_dim == 16
