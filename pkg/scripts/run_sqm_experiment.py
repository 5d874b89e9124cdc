"""Query-generation experiment: full SQM context vs a no-context baseline.

For every shipped metadata record, the analyst question is the record's
use_case text and the reference is its repository query. Reports mean BLEU,
mean ROUGE-L, and the validation pass rate (the executability proxy) for both
settings on both platforms.

Run: python scripts/run_sqm_experiment.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from soctriage.config import AppConfig
from soctriage.evaluation import bleu, rouge_l
from soctriage.sqm import SqmEngine, load_metadata, load_query_repo, data_path


def main() -> int:
    app = AppConfig()
    registry = app.registry()
    provider = app.provider(app.sqm_provider)
    embedder = app.embedder()

    print(f"{'platform':<14} {'setting':<10} {'bleu':>6} {'rouge_l':>8} {'valid%':>7} {'n':>4}")
    for platform in ("qradar_aql", "secops_yaral"):
        records = load_metadata(data_path() / "repo" / f"{platform}_metadata.jsonl")
        repo = load_query_repo(data_path() / "repo" / f"{platform}_queries.jsonl")
        engines = {
            "sqm": SqmEngine.build(platform, provider, registry, embedder, exemplar_k=3, doc_k=2),
            "baseline": SqmEngine.build(platform, provider, registry, embedder, exemplar_k=0, doc_k=0),
        }
        for setting, engine in engines.items():
            bleus, rouges, valid = [], [], 0
            for record in records:
                generated = engine.generate(record.use_case)
                reference = repo[record.query_id]
                bleus.append(bleu(generated.query_text.split(), reference.split()))
                rouges.append(rouge_l(generated.query_text.split(), reference.split()))
                valid += generated.validation.passed
            n = len(records)
            print(f"{platform:<14} {setting:<10} {sum(bleus)/n:>6.3f} {sum(rouges)/n:>8.3f} "
                  f"{100*valid/n:>6.1f}% {n:>4}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
