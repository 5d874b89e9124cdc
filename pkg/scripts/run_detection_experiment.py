"""Detection experiment on a synthetic desk-scale corpus.

Trains the native classifier suite on hybrid-selected features, runs the
3-provider mock ensemble over the held-out split, and prints one comparison
table (accuracy / precision / recall / F1 / FPR per model, ensemble last).

Run: python scripts/run_detection_experiment.py [--events 2000] [--seed 42]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from soctriage.classifiers import ModelSpec, fit, predict
from soctriage.config import AppConfig
from soctriage.detection import ensemble_detect
from soctriage.evaluation import classification_report
from soctriage.featsel import rfe_ranks, score_features, select_top_k, unified_ranking
from soctriage.ingest import FeatureEncoder, FeatureMatrix, PreprocessConfig, generate_corpus, preprocess


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--events", type=int, default=2000)
    parser.add_argument("--critical-fraction", type=float, default=0.4)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--top-k-features", type=int, default=24)
    args = parser.parse_args()

    cfg = PreprocessConfig()
    events = preprocess(generate_corpus(args.events, args.critical_fraction, args.seed), cfg)
    split = int(len(events) * 0.7)
    encoder = FeatureEncoder(cfg).fit(events[:split])
    train = encoder.transform(events[:split])
    test = encoder.transform(events[split:])

    score_sets = [score_features(train, m) for m in ("chi2", "anova_f", "mutual_info", "tree_importance")]
    score_sets.append(rfe_ranks(train, keep=max(1, len(train.feature_names) // 2)))
    ranking = unified_ranking(score_sets)
    keep = select_top_k(ranking, min(args.top_k_features, len(ranking)))
    cols = [train.feature_names.index(name) for name in keep]
    train = FeatureMatrix(feature_names=keep, rows=train.rows[:, cols], labels=train.labels)
    test = FeatureMatrix(feature_names=keep, rows=test.rows[:, cols], labels=test.labels)
    print(f"{len(events)} events, {len(keep)} features after hybrid selection\n")

    rows = []
    for kind in ("logreg", "naive_bayes", "decision_tree", "adaboost"):
        model = fit(ModelSpec(kind=kind), train)
        report = classification_report(list(test.labels), list(predict(model, test)))
        rows.append((kind, report))

    app = AppConfig()
    registry = app.registry()
    trio = [app.provider(pid) for pid in app.detection_trio]
    held_out = events[split:]
    verdicts = [ensemble_detect(e, trio, registry, mag_max=app.mag_max) for e in held_out]
    ensemble_report = classification_report(
        [e.label for e in held_out], [v.ensemble_label for v in verdicts])
    rows.append(("mock-llm-ensemble", ensemble_report))

    print(f"{'model':<20} {'acc':>6} {'prec':>6} {'rec':>6} {'f1':>6} {'fpr':>6}")
    for name, report in rows:
        print(f"{name:<20} {report.accuracy:>6.3f} {report.precision:>6.3f} "
              f"{report.recall:>6.3f} {report.f1:>6.3f} {report.fpr:>6.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
