"""Command-line surface: simulate, ingest, detect, genquery, resolve, eval,
pipeline, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig
from .detection import ensemble_detect, rank_queue
from .errors import SocTriageError
from .evaluation import bleu, classification_report, rouge_l
from .ingest import (
    build_feature_matrix,
    generate_corpus,
    load_events,
    preprocess,
    save_events,
)
from .resolution import (
    SimulatedExecutor,
    attach_evidence,
    build_rag_context,
    classify_resolution,
    generate_tickets,
    load_tickets,
    parse_code,
    save_tickets,
    weighted_ensemble,
    ResolutionOutput,
)
from .retrieval import VectorIndex
from .sqm import GeneratedQuery, SqmEngine, ValidationReport
from .store import Store


def _load_config(path: str | None) -> AppConfig:
    return AppConfig.load(path) if path else AppConfig()


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events = generate_corpus(args.events, args.critical_fraction, args.seed)
    save_events(events, out / "corpus.jsonl")
    tickets = generate_tickets(args.tickets, args.seed + 1)
    save_tickets(tickets, out / "tickets.jsonl")
    print(f"wrote {len(events)} events and {len(tickets)} tickets to {out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    events = load_events(args.input, args.format)
    clean = preprocess(events, cfg.preprocess)
    save_events(clean, args.out)
    print(f"preprocessed {len(events)} -> {len(clean)} events -> {args.out}")
    if args.features:
        embedder = cfg.embedder() if cfg.preprocess.embed_text else None
        matrix = build_feature_matrix(clean, cfg.preprocess, embedder)
        doc = {"feature_names": matrix.feature_names, "rows": matrix.rows.tolist()}
        if matrix.labels is not None:
            doc["labels"] = matrix.labels.tolist()
        Path(args.features).write_text(json.dumps(doc), encoding="utf-8")
        print(f"feature matrix {matrix.rows.shape} -> {args.features}")
    return 0


def cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    registry = cfg.registry()
    trio = [cfg.provider(pid) for pid in cfg.detection_trio]
    events = preprocess(load_events(args.input), cfg.preprocess)
    verdicts = []
    with open(args.out, "w", encoding="utf-8") as fh:
        for event in events:
            verdict = ensemble_detect(event, trio, registry, mag_max=cfg.mag_max)
            verdicts.append(verdict)
            fh.write(json.dumps(verdict.to_json(), sort_keys=True) + "\n")
    queue = rank_queue(verdicts)
    if args.queue:
        if args.queue.endswith(".csv"):
            Path(args.queue).write_text(queue.to_csv(), encoding="utf-8")
        else:
            Path(args.queue).write_text(json.dumps(queue.to_json(), indent=2), encoding="utf-8")
    critical = sum(1 for v in verdicts if v.ensemble_label)
    print(f"{len(verdicts)} verdicts ({critical} critical) -> {args.out}")
    return 0


def cmd_genquery(args) -> int:
    cfg = _load_config(args.config)
    engine = SqmEngine.build(
        args.platform, cfg.provider(cfg.sqm_provider), cfg.registry(), cfg.embedder(),
        exemplar_k=cfg.exemplar_k, doc_k=cfg.doc_k, repair_rounds=cfg.repair_rounds,
    )
    generated = engine.generate(args.question, repair=not args.no_repair)
    print(json.dumps(generated.to_json(), indent=2, sort_keys=True))
    return 0 if generated.validation.passed else 1


def cmd_resolve(args) -> int:
    cfg = _load_config(args.config)
    registry = cfg.registry()
    embedder = cfg.embedder()
    tickets = {t.ticket_id: t for t in load_tickets(args.tickets)}
    if args.ticket not in tickets:
        print(f"unknown ticket {args.ticket!r}", file=sys.stderr)
        return 2
    ticket = tickets[args.ticket]
    history = [t for t in tickets.values() if t.ticket_id != args.ticket and t.ground_truth_code]
    from .resolution import build_history_index, build_runbook_index
    from .sqm import data_path

    history_index = build_history_index(history, embedder) if history else VectorIndex(dim=embedder.dim)
    runbook_index = build_runbook_index(data_path() / "runbooks", embedder)
    context = build_rag_context(ticket, history_index, runbook_index, cfg.rag_k, embedder)

    evidence = None
    refs: list[str] = []
    if args.with_evidence:
        if not args.queries or not args.events:
            print("--with-evidence needs --queries and --events", file=sys.stderr)
            return 2
        events = load_events(args.events)
        generated = []
        for line in Path(args.queries).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            generated.append(GeneratedQuery(
                platform=doc["platform"], question=doc["question"], query_text=doc["query_text"],
                exemplar_ids=tuple(doc.get("exemplar_ids", [])),
                validation=ValidationReport.from_json(doc["validation"]),
                prompt_digest=doc.get("provenance", {}).get("prompt_digest", ""),
                provider_id=doc.get("provenance", {}).get("provider_id", ""),
            ))
        passing = [g for g in generated if g.validation.passed][: cfg.evidence_per_ticket]
        evidence = attach_evidence(ticket, passing, SimulatedExecutor(events))
        refs = [g.prompt_digest[:12] for g in passing]

    primary = cfg.provider(cfg.resolution_primary)
    if args.ensemble:
        secondary = cfg.provider(cfg.resolution_secondary)
        first = classify_resolution(ticket, context, evidence, primary, registry, refs)
        second = classify_resolution(ticket, context, evidence, secondary, registry, refs)
        weighted = list(zip((first, second), cfg.resolution_weights))
        lead = max(weighted, key=lambda pair: pair[1])[0]
        output = ResolutionOutput(
            code=weighted_ensemble(weighted), justification=lead.justification,
            actions=lead.actions, evidence_refs=tuple(refs),
            model_id=f"ensemble({primary.model_id},{secondary.model_id})",
        )
    else:
        output = classify_resolution(ticket, context, evidence, primary, registry, refs)
    print(json.dumps(output.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    if args.task == "detect":
        events = {e.id: e for e in load_events(args.truth)}
        y_true, y_pred = [], []
        for line in Path(args.input).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            event = events.get(doc["event_id"])
            if event is not None and event.label is not None:
                y_true.append(event.label)
                y_pred.append(bool(doc["ensemble_label"]))
        report = classification_report(y_true, y_pred)
        print(report.table())
        print(json.dumps(report.to_json(), sort_keys=True))
    elif args.task == "query":
        refs = {}
        for line in Path(args.truth).read_text(encoding="utf-8").splitlines():
            if line.strip():
                doc = json.loads(line)
                refs[doc["query_id"]] = doc["query"]
        bleus, rouges = [], []
        for line in Path(args.input).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            reference = refs.get(doc.get("reference_id", ""))
            if reference is None:
                continue
            bleus.append(bleu(doc["query_text"].split(), reference.split()))
            rouges.append(rouge_l(doc["query_text"].split(), reference.split()))
        if not bleus:
            print("no prediction/reference pairs matched", file=sys.stderr)
            return 2
        print(json.dumps({
            "bleu": sum(bleus) / len(bleus),
            "rouge_l": sum(rouges) / len(rouges),
            "pairs": len(bleus),
        }, sort_keys=True))
    else:
        tickets = {t.ticket_id: t for t in load_tickets(args.truth)}
        y_true, y_pred = [], []
        for line in Path(args.input).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            ticket = tickets.get(doc["ticket_id"])
            if ticket is not None and ticket.ground_truth_code is not None:
                y_true.append(ticket.ground_truth_code)
                y_pred.append(parse_code(doc["output"]["code"] if "output" in doc else doc["code"]))
        report = classification_report(y_true, y_pred)
        print(report.table())
        print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_pipeline(args) -> int:
    from .pipeline import run_pipeline

    cfg = _load_config(args.config)
    events = load_events(args.events)
    tickets = load_tickets(args.tickets) if args.tickets else []
    result = run_pipeline(events, tickets, cfg)
    summary_path, timing_path = result.write(args.out)
    if args.store:
        store = Store(args.store)
        run_id = args.run_id or f"run-{len(store.records('reports')) + 1:04d}"
        store.append("reports", {"run_id": run_id, "summary": result.summary, "timing": result.timing})
        print(f"report stored as {run_id} in {args.store}")
    print(f"summary -> {summary_path}\ntiming -> {timing_path}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    if args.port:
        cfg.port = args.port
    if args.store:
        cfg.store_root = args.store
    from .service import serve

    serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soctriage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic corpus and tickets")
    p.add_argument("--events", type=int, default=200)
    p.add_argument("--tickets", type=int, default=20)
    p.add_argument("--critical-fraction", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="./sim")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("ingest", help="preprocess a corpus and optionally emit features")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jsonl", "csv"], default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--features", default=None)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("detect", help="run the 3-provider ensemble over a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--queue", default=None)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("genquery", help="generate one SIEM query through SQM")
    p.add_argument("--platform", required=True, choices=["qradar_aql", "secops_yaral"])
    p.add_argument("--question", required=True)
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_genquery)

    p = sub.add_parser("resolve", help="classify one ticket's resolution code")
    p.add_argument("--ticket", required=True)
    p.add_argument("--tickets", required=True)
    p.add_argument("--with-evidence", action="store_true")
    p.add_argument("--ensemble", action="store_true")
    p.add_argument("--queries", default=None)
    p.add_argument("--events", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_resolve)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--task", required=True, choices=["detect", "query", "resolve"])
    p.add_argument("--input", "--in", required=True, help="predictions (JSONL)")
    p.add_argument("--truth", required=True, help="ground truth (JSONL)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("pipeline", help="run the full detect->query->resolve pipeline")
    p.add_argument("--events", required=True)
    p.add_argument("--tickets", default=None)
    p.add_argument("--out", default="./pipeline-out")
    p.add_argument("--config", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--run-id", default=None)
    p.set_defaults(fn=cmd_pipeline)

    p = sub.add_parser("serve", help="run the REST service")
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--store", default=None)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SocTriageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
