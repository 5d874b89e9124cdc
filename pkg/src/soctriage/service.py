"""REST service binding the pipeline together for the analyst console.

Detection runs asynchronously behind POST /logs on a single worker thread
(mirroring the event-stream reality of a SOC); everything else is
request-response. Every mutating endpoint appends to the store before
answering, and the in-memory state is always reconstructible by replaying the
logs. Analyst edits to queries re-run validation before persistence: text
that fails never reaches the store or an evidence block.
"""

from __future__ import annotations

import queue as queue_mod
import threading
from contextlib import asynccontextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .config import AppConfig
from .detection import DetectionVerdict, Vote, ensemble_detect, rank_queue
from .errors import InvalidCodeError, SocTriageError
from .evaluation import SETTINGS
from .gateway import ProviderRegistry
from .ingest import LogEvent, event_from_json
from .resolution import (
    IncidentTicket,
    SimulatedExecutor,
    attach_evidence,
    build_rag_context,
    build_runbook_index,
    classify_resolution,
    parse_code,
    weighted_ensemble,
    ResolutionOutput,
)
from .retrieval import VectorIndex
from .sqm import PLATFORMS, SqmEngine, GeneratedQuery, data_path, load_shipped_allowlist, validate_query
from .store import ServiceState, Store


class LogsRequest(BaseModel):
    events: list[dict[str, Any]]


class TicketsRequest(BaseModel):
    tickets: list[dict[str, Any]]


class GenerateRequest(BaseModel):
    platform: str
    question: str
    repair: bool = True


class DecisionRequest(BaseModel):
    action: str
    payload: dict[str, Any] = {}
    actor: str = "analyst"


QUERY_ACTIONS = ("approve", "edit", "reject")
TICKET_ACTIONS = ("accept", "override_code")


class ServiceContext:
    def __init__(self, cfg: AppConfig, store: Store, registry: ProviderRegistry | None = None):
        self.cfg = cfg
        self.store = store
        self.registry = registry or cfg.registry()
        self.embedder = cfg.embedder()
        self.state = ServiceState.replay(store)
        self.lock = threading.RLock()
        self.work: "queue_mod.Queue[str | None]" = queue_mod.Queue()
        self.worker: threading.Thread | None = None
        self.stopping = threading.Event()
        self._engines: dict[str, SqmEngine] = {}
        self.runbook_index = build_runbook_index(data_path() / "runbooks", self.embedder)
        self.history_index = VectorIndex(dim=self.embedder.dim)

    def engine(self, platform: str) -> SqmEngine:
        if platform not in self._engines:
            self._engines[platform] = SqmEngine.build(
                platform, self.cfg.provider(self.cfg.sqm_provider), self.registry, self.embedder,
                exemplar_k=self.cfg.exemplar_k, doc_k=self.cfg.doc_k,
                repair_rounds=self.cfg.repair_rounds,
            )
        return self._engines[platform]

    def start_worker(self) -> None:
        self.worker = threading.Thread(target=self._detect_loop, name="detect-worker", daemon=True)
        self.worker.start()

    def stop_worker(self) -> None:
        # Drain: the sentinel sits behind any queued work.
        self.stopping.set()
        self.work.put(None)
        if self.worker is not None:
            self.worker.join(timeout=30)

    def _detect_loop(self) -> None:
        trio = [self.cfg.provider(pid) for pid in self.cfg.detection_trio]
        while True:
            event_id = self.work.get()
            if event_id is None:
                if self.stopping.is_set() and self.work.empty():
                    return
                continue
            with self.lock:
                doc = self.state.events.get(event_id)
            if doc is None:
                continue
            try:
                event = event_from_json(doc)
                verdict = ensemble_detect(event, trio, self.registry, mag_max=self.cfg.mag_max)
                record = verdict.to_json()
            except SocTriageError as exc:
                record = {"event_id": event_id, "error": str(exc)}
            with self.lock:
                self.store.append("verdicts", record)
                self.state.verdicts[event_id] = record

    def pending(self) -> int:
        return self.work.qsize()


def _verdict_from_record(record: dict) -> DetectionVerdict | None:
    if "error" in record:
        return None
    return DetectionVerdict(
        event_id=record["event_id"],
        votes=tuple(Vote(**v) for v in record["votes"]),
        ensemble_label=record["ensemble_label"],
        criticality_prob=record["criticality_prob"],
        risk_score=record["risk_score"],
    )


def create_app(cfg: AppConfig, store: Store | None = None,
               registry: ProviderRegistry | None = None) -> FastAPI:
    ctx = ServiceContext(cfg, store or Store(cfg.store_root), registry)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        ctx.start_worker()
        yield
        ctx.stop_worker()

    app = FastAPI(title="soctriage", version=__version__, lifespan=lifespan)
    app.state.ctx = ctx

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "pending_detections": ctx.pending()}

    @app.post("/logs")
    def post_logs(body: LogsRequest):
        accepted = []
        for doc in body.events:
            try:
                event = event_from_json(doc)
            except SocTriageError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            record = event.to_json()
            with ctx.lock:
                ctx.store.append("events", record)
                ctx.state.events[event.id] = record
            ctx.work.put(event.id)
            accepted.append(event.id)
        return {"accepted": accepted, "pending_detections": ctx.pending()}

    @app.get("/queue")
    def get_queue(format: str = "json"):
        with ctx.lock:
            verdicts = [v for v in map(_verdict_from_record, ctx.state.verdicts.values()) if v]
        queue = rank_queue(verdicts)
        if format == "csv":
            from fastapi.responses import PlainTextResponse

            return PlainTextResponse(queue.to_csv(), media_type="text/csv")
        return queue.to_json()

    @app.get("/events/{event_id}")
    def get_event(event_id: str):
        with ctx.lock:
            record = ctx.state.events.get(event_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown event {event_id}")
        return record

    @app.get("/verdicts/{event_id}")
    def get_verdict(event_id: str):
        with ctx.lock:
            record = ctx.state.verdicts.get(event_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no verdict for event {event_id}")
        return record

    @app.post("/queries/generate")
    def generate(body: GenerateRequest):
        if body.platform not in PLATFORMS:
            raise HTTPException(status_code=422, detail=f"unknown platform {body.platform!r}")
        try:
            generated = ctx.engine(body.platform).generate(body.question, repair=body.repair)
        except SocTriageError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        with ctx.lock:
            query_id = f"q-{len(ctx.state.queries) + 1:04d}"
            record = {"query_id": query_id, **generated.to_json()}
            ctx.store.append("queries", record)
            ctx.state.queries[query_id] = record
        return record

    @app.get("/queries/{query_id}")
    def get_query(query_id: str):
        with ctx.lock:
            record = ctx.state.queries.get(query_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown query {query_id}")
        return record

    @app.post("/queries/{query_id}/decision")
    def query_decision(query_id: str, body: DecisionRequest):
        if body.action not in QUERY_ACTIONS:
            raise HTTPException(status_code=422, detail=f"action must be one of {QUERY_ACTIONS}")
        with ctx.lock:
            record = ctx.state.queries.get(query_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown query {query_id}")
        payload = dict(body.payload)
        if body.action == "edit":
            new_text = str(payload.get("query_text", ""))
            report = validate_query(new_text, load_shipped_allowlist(record["platform"]))
            if not report.passed:
                return JSONResponse(status_code=422, content=report.to_json())
            payload = {"query_text": new_text, "validation": report.to_json()}
        decision = {
            "subject_kind": "query",
            "subject_id": query_id,
            "action": body.action,
            "payload": payload,
            "actor": body.actor,
            "at": datetime.now(timezone.utc).isoformat(),
        }
        with ctx.lock:
            ctx.store.append("decisions", decision)
            ctx.state.apply_decision(decision)
            return ctx.state.queries[query_id]

    @app.post("/tickets")
    def import_tickets(body: TicketsRequest):
        accepted = []
        for doc in body.tickets:
            try:
                ticket = IncidentTicket.from_json(doc)
            except (SocTriageError, KeyError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            record = ticket.to_json()
            with ctx.lock:
                ctx.store.append("tickets", record)
                ctx.state.tickets[ticket.ticket_id] = record
            accepted.append(ticket.ticket_id)
        return {"accepted": accepted}

    @app.get("/tickets/{ticket_id}")
    def get_ticket(ticket_id: str):
        with ctx.lock:
            record = ctx.state.tickets.get(ticket_id)
            if record is None:
                raise HTTPException(status_code=404, detail=f"unknown ticket {ticket_id}")
            resolutions = list(ctx.state.resolutions.get(ticket_id, []))
            decisions = [d for d in ctx.state.decisions if d["subject_id"] == ticket_id]
        return {"ticket": record, "resolutions": resolutions, "decisions": decisions}

    @app.post("/tickets/{ticket_id}/resolve")
    def resolve_ticket(ticket_id: str, setting: str = "no_sqm"):
        if setting not in SETTINGS:
            raise HTTPException(status_code=422, detail=f"setting must be one of {SETTINGS}")
        with ctx.lock:
            record = ctx.state.tickets.get(ticket_id)
            if record is None:
                raise HTTPException(status_code=404, detail=f"unknown ticket {ticket_id}")
            events = [event_from_json(doc) for doc in ctx.state.events.values()]
            passing = [
                q for q in ctx.state.queries.values()
                if q["validation"]["passed"] and q.get("decision") != "reject"
            ][: ctx.cfg.evidence_per_ticket]
        ticket = IncidentTicket.from_json(record)
        context = build_rag_context(ticket, ctx.history_index, ctx.runbook_index,
                                    ctx.cfg.rag_k, ctx.embedder)
        evidence = None
        evidence_refs: list[str] = []
        if setting != "no_sqm" and passing:
            generated = [
                GeneratedQuery(
                    platform=q["platform"], question=q["question"], query_text=q["query_text"],
                    exemplar_ids=tuple(q["exemplar_ids"]),
                    validation=_report_from_json(q["validation"]),
                    prompt_digest=q["provenance"]["prompt_digest"],
                    provider_id=q["provenance"]["provider_id"],
                )
                for q in passing
            ]
            evidence = attach_evidence(ticket, generated, SimulatedExecutor(events))
            evidence_refs = [q["query_id"] for q in passing]
        try:
            primary = ctx.cfg.provider(ctx.cfg.resolution_primary)
            if setting == "ensemble_with_sqm":
                secondary = ctx.cfg.provider(ctx.cfg.resolution_secondary)
                first = classify_resolution(ticket, context, evidence, primary, ctx.registry, evidence_refs)
                second = classify_resolution(ticket, context, evidence, secondary, ctx.registry, evidence_refs)
                weighted = list(zip((first, second), ctx.cfg.resolution_weights))
                lead = max(weighted, key=lambda pair: pair[1])[0]
                output = ResolutionOutput(
                    code=weighted_ensemble(weighted),
                    justification=lead.justification,
                    actions=lead.actions,
                    evidence_refs=tuple(evidence_refs),
                    model_id=f"ensemble({primary.model_id},{secondary.model_id})",
                )
            else:
                output = classify_resolution(ticket, context, evidence, primary, ctx.registry, evidence_refs)
        except SocTriageError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        result = {
            "ticket_id": ticket_id,
            "setting": setting,
            "output": output.to_json(),
            "evidence_refs": evidence_refs,
            "model_id": output.model_id,
        }
        with ctx.lock:
            ctx.store.append("resolutions", result)
            ctx.state.resolutions.setdefault(ticket_id, []).append(result)
        return result

    @app.post("/tickets/{ticket_id}/decision")
    def ticket_decision(ticket_id: str, body: DecisionRequest):
        if body.action not in TICKET_ACTIONS:
            raise HTTPException(status_code=422, detail=f"action must be one of {TICKET_ACTIONS}")
        with ctx.lock:
            if ticket_id not in ctx.state.tickets:
                raise HTTPException(status_code=404, detail=f"unknown ticket {ticket_id}")
            if ticket_id not in ctx.state.resolutions:
                raise HTTPException(status_code=409, detail="ticket has no resolution to decide on")
        payload = dict(body.payload)
        if body.action == "override_code":
            try:
                payload["code"] = parse_code(str(payload.get("code", ""))).value
            except InvalidCodeError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        decision = {
            "subject_kind": "ticket",
            "subject_id": ticket_id,
            "action": body.action,
            "payload": payload,
            "actor": body.actor,
            "at": datetime.now(timezone.utc).isoformat(),
        }
        with ctx.lock:
            ctx.store.append("decisions", decision)
            ctx.state.apply_decision(decision)
            return ctx.state.resolutions[ticket_id][-1]

    @app.get("/decisions")
    def get_decisions():
        with ctx.lock:
            return {"decisions": list(ctx.state.decisions)}

    @app.get("/reports")
    def list_reports():
        with ctx.lock:
            return {"run_ids": sorted(ctx.state.reports)}

    @app.get("/reports/{run_id}")
    def get_report(run_id: str):
        with ctx.lock:
            record = ctx.state.reports.get(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return record

    console_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if console_dist.is_dir():
        app.mount("/console", StaticFiles(directory=console_dist, html=True), name="console")

    return app


def _report_from_json(doc: dict):
    from .sqm import ValidationReport

    return ValidationReport.from_json(doc)


def serve(cfg: AppConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")
