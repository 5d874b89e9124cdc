"""Resolution experiment across the three evidence settings.

Builds a synthetic closed-ticket history plus the shipped runbooks for RAG
context, generates evidence queries through SQM, then evaluates no_sqm,
with_sqm, and ensemble_with_sqm. Also grid-searches the two-model ensemble
weights on a validation split. Prints accuracy / macro-F1 / judge score per
setting.

Run: python scripts/run_resolution_experiment.py [--tickets 40] [--seed 7]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from soctriage.config import AppConfig
from soctriage.evaluation import ResolutionHarness, run_resolution_experiment
from soctriage.ingest import generate_corpus
from soctriage.resolution import (
    SimulatedExecutor,
    attach_evidence,
    build_history_index,
    build_rag_context,
    build_runbook_index,
    classify_resolution,
    generate_tickets,
    grid_search_weights,
)
from soctriage.sqm import SqmEngine, data_path


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--tickets", type=int, default=40)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--trace-dir", default=None)
    args = parser.parse_args()

    app = AppConfig()
    registry = app.registry()
    embedder = app.embedder()

    tickets = generate_tickets(args.tickets, seed=args.seed)
    history = generate_tickets(60, seed=args.seed + 1)
    history = [h for h in history if h.ticket_id not in {t.ticket_id for t in tickets}]
    # History ids collide with test ids by construction of the generator, so
    # re-key them as archive entries before indexing.
    for i, h in enumerate(history):
        h.ticket_id = f"hist-{i:04d}"
    history_index = build_history_index(history, embedder)
    runbook_index = build_runbook_index(data_path() / "runbooks", embedder)

    corpus = generate_corpus(300, 0.4, seed=args.seed + 2)
    executor = SimulatedExecutor(corpus)
    engine = SqmEngine.build(app.platform, app.provider(app.sqm_provider), registry, embedder)
    questions = [
        "Find sources with many failed logins in the last day",
        "Rank source and destination pairs by total bytes sent out in the last day",
        "Show the most frequent denied connections by source in the last four hours",
    ]
    queries = [engine.generate(q) for q in questions]
    passing = [q for q in queries if q.validation.passed]
    print(f"evidence queries: {len(passing)}/{len(queries)} passed validation")

    harness = ResolutionHarness(
        primary=app.provider(app.resolution_primary),
        secondary=app.provider(app.resolution_secondary),
        registry=registry,
        judge=app.provider(app.judge_provider),
        context_fn=lambda t: build_rag_context(t, history_index, runbook_index, app.rag_k, embedder),
        evidence_fn=lambda t: attach_evidence(t, passing, executor),
        weights=app.resolution_weights,
        trace_dir=Path(args.trace_dir) if args.trace_dir else None,
    )

    validation = [(t, t.ground_truth_code) for t in tickets[: max(4, len(tickets) // 4)]]
    predictors = [
        lambda t, p=harness.primary: classify_resolution(
            t, harness.context_fn(t), harness.evidence_fn(t), p, registry),
        lambda t, p=harness.secondary: classify_resolution(
            t, harness.context_fn(t), harness.evidence_fn(t), p, registry),
    ]
    weights = grid_search_weights(validation, predictors, step=0.05)
    print(f"grid-searched ensemble weights: {weights[0]:.2f} / {weights[1]:.2f} "
          f"(configured: {app.resolution_weights[0]:.2f} / {app.resolution_weights[1]:.2f})")

    print(f"\n{'setting':<20} {'acc':>6} {'macro_f1':>9} {'judge':>6}")
    for setting in ("no_sqm", "with_sqm", "ensemble_with_sqm"):
        result = run_resolution_experiment(tickets, setting, harness)
        print(f"{setting:<20} {result.report.accuracy:>6.3f} {result.report.f1:>9.3f} "
              f"{result.judge.mean:>6.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
