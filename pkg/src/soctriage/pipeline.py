"""End-to-end run: detect -> rank -> generate evidence queries for the top of
the queue -> resolve tickets -> evaluate.

Stage errors are recorded per item and the run continues. The summary artifact
is fully deterministic under fixed seeds and mock providers (no clocks inside
it); wall-clock measurements live in a separate timing report, since the
machine latency per incident is itself a reported quantity.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .config import AppConfig
from .detection import ensemble_detect, rank_queue
from .errors import SocTriageError
from .evaluation import ResolutionHarness, classification_report, run_resolution_experiment
from .gateway import ProviderRegistry
from .ingest import LogEvent, preprocess
from .resolution import IncidentTicket, SimulatedExecutor, attach_evidence, build_history_index, build_rag_context
from .retrieval import VectorIndex
from .sqm import GeneratedQuery, SqmEngine


@dataclass
class PipelineSummary:
    summary: dict[str, Any]
    timing: dict[str, Any]

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary_path = out / "summary.json"
        timing_path = out / "timing.json"
        summary_path.write_text(json.dumps(self.summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        timing_path.write_text(json.dumps(self.timing, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return summary_path, timing_path


def _event_question(event: LogEvent) -> str:
    return (
        f"Investigate {event.category} activity from source {event.fields.get('src_ip', 'unknown')} "
        f"related to: {event.message}"
    )


def run_pipeline(
    events: Sequence[LogEvent],
    tickets: Sequence[IncidentTicket],
    cfg: AppConfig,
    registry: ProviderRegistry | None = None,
    history: Sequence[IncidentTicket] = (),
) -> PipelineSummary:
    registry = registry or cfg.registry()
    embedder = cfg.embedder()
    errors: list[dict[str, str]] = []
    timing: dict[str, Any] = {}

    started = time.perf_counter()
    clean = preprocess(list(events), cfg.preprocess)
    timing["preprocess_s"] = time.perf_counter() - started

    trio = [cfg.provider(pid) for pid in cfg.detection_trio]
    verdicts = []
    t0 = time.perf_counter()
    for event in clean:
        try:
            verdicts.append(ensemble_detect(event, trio, registry, mag_max=cfg.mag_max))
        except SocTriageError as exc:
            errors.append({"stage": "detect", "item": event.id, "error": str(exc)})
    timing["detect_s"] = time.perf_counter() - t0

    queue = rank_queue(verdicts)

    engine = SqmEngine.build(
        cfg.platform, cfg.provider(cfg.sqm_provider), registry, embedder,
        exemplar_k=cfg.exemplar_k, doc_k=cfg.doc_k, repair_rounds=cfg.repair_rounds,
    )
    by_id = {event.id: event for event in clean}
    queries: list[GeneratedQuery] = []
    t0 = time.perf_counter()
    for event_id, _, _ in queue.entries[: cfg.query_top_n]:
        try:
            queries.append(engine.generate(_event_question(by_id[event_id])))
        except SocTriageError as exc:
            errors.append({"stage": "genquery", "item": event_id, "error": str(exc)})
    timing["genquery_s"] = time.perf_counter() - t0

    executor = SimulatedExecutor(clean)
    passing = [q for q in queries if q.validation.passed][: cfg.evidence_per_ticket]
    if history:
        history_index = build_history_index(list(history), embedder)
    else:
        history_index = VectorIndex(dim=embedder.dim)
    runbook_index = VectorIndex(dim=embedder.dim)

    harness = ResolutionHarness(
        primary=cfg.provider(cfg.resolution_primary),
        secondary=cfg.provider(cfg.resolution_secondary),
        registry=registry,
        judge=cfg.provider(cfg.judge_provider),
        context_fn=lambda t: build_rag_context(t, history_index, runbook_index, cfg.rag_k, embedder),
        evidence_fn=lambda t: attach_evidence(t, passing, executor),
        weights=cfg.resolution_weights,
    )

    resolution_block: dict[str, Any] = {"count": 0}
    judge_block: dict[str, Any] = {}
    per_incident: list[float] = []
    scoreable = [t for t in tickets if t.ground_truth_code is not None]
    if scoreable:
        t0 = time.perf_counter()
        result = run_resolution_experiment(scoreable, "ensemble_with_sqm", harness)
        timing["resolve_s"] = time.perf_counter() - t0
        resolution_block = {
            "count": len(scoreable),
            "report": result.report.to_json(),
        }
        judge_block = result.judge.to_json()
        per_incident = list(harness.per_ticket_s)

    detection_block: dict[str, Any] = {"count": len(verdicts)}
    labeled = [(by_id[v.event_id].label, v.ensemble_label) for v in verdicts if by_id[v.event_id].label is not None]
    if labeled:
        y_true, y_pred = zip(*labeled)
        detection_block["report"] = classification_report(list(y_true), list(y_pred)).to_json()

    summary = {
        "events_in": len(events),
        "events_after_preprocess": len(clean),
        "detection": detection_block,
        "queue": [
            {"event_id": eid, "risk_score": round(risk, 12)} for eid, risk, _ in queue.entries
        ],
        "queries": [q.to_json() for q in queries],
        "resolution": resolution_block,
        "judge": judge_block,
        "errors": errors,
    }
    timing["total_s"] = time.perf_counter() - started
    timing["per_incident_s"] = {
        "mean": sum(per_incident) / len(per_incident) if per_incident else 0.0,
        "max": max(per_incident) if per_incident else 0.0,
        "note": "machine latency only; analyst time is out of scope",
    }
    return PipelineSummary(summary=summary, timing=timing)
