"""Every metric the engine reports, plus the resolution experiment runner.

Covers confusion-matrix metrics with the false-positive rate (the alert
fatigue number), BLEU with brevity penalty and add-one smoothing for zero
n-gram hits (the raw geometric mean is undefined at log 0), ROUGE-L in its
LCS-ratio form, and an LLM-as-judge harness over fixed 0-10 dimensions.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Hashable, Sequence

from .errors import ClassificationError, UsageError
from .gateway import JUDGE_MARKER, Prompt, ProviderConfig, ProviderRegistry, complete
from .resolution import (
    EvidenceBlock,
    IncidentTicket,
    ResolutionCode,
    ResolutionOutput,
    classify_resolution,
    extract_json_object,
    weighted_ensemble,
)


@dataclass(frozen=True)
class ClassReport:
    precision: float
    recall: float
    f1: float
    fpr: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    per_class: dict[str, ClassReport]
    sample_count: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "sample_count": self.sample_count,
            "per_class": {
                name: {"precision": r.precision, "recall": r.recall, "f1": r.f1,
                       "fpr": r.fpr, "support": r.support}
                for name, r in self.per_class.items()
            },
        }

    def table(self) -> str:
        lines = [f"{'class':<28} {'prec':>6} {'rec':>6} {'f1':>6} {'fpr':>6} {'n':>5}"]
        for name, r in sorted(self.per_class.items()):
            lines.append(f"{name:<28} {r.precision:>6.3f} {r.recall:>6.3f} {r.f1:>6.3f} {r.fpr:>6.3f} {r.support:>5}")
        lines.append(
            f"{'macro / overall':<28} {self.precision:>6.3f} {self.recall:>6.3f} "
            f"{self.f1:>6.3f} {self.fpr:>6.3f} {self.sample_count:>5}"
        )
        lines.append(f"accuracy: {self.accuracy:.3f}")
        return "\n".join(lines)


def _class_counts(y_true: Sequence[Hashable], y_pred: Sequence[Hashable], cls: Hashable) -> tuple[int, int, int, int]:
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
    tn = len(y_true) - tp - fp - fn
    return tp, fp, fn, tn


def _per_class(tp: int, fp: int, fn: int, tn: int) -> ClassReport:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return ClassReport(precision=precision, recall=recall, f1=f1, fpr=fpr, support=tp + fn)


def classification_report(y_true: Sequence[Hashable], y_pred: Sequence[Hashable]) -> EvalReport:
    """Binary (positive class = the critical/True label) or macro-averaged
    multiclass report. Per-class zero divisions score 0 for that class."""
    if len(y_true) != len(y_pred):
        raise UsageError(f"length mismatch: {len(y_true)} vs {len(y_pred)}")
    if not y_true:
        raise UsageError("cannot report on an empty sample")
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    labels = set(y_true) | set(y_pred)
    binary = labels <= {True, False}
    if binary:
        report = _per_class(*_class_counts(y_true, y_pred, True))
        per_class = {"critical": report}
        return EvalReport(
            accuracy=accuracy, precision=report.precision, recall=report.recall,
            f1=report.f1, fpr=report.fpr, per_class=per_class, sample_count=len(y_true),
        )
    per_class = {}
    for cls in sorted(labels, key=str):
        name = cls.value if isinstance(cls, ResolutionCode) else str(cls)
        per_class[name] = _per_class(*_class_counts(y_true, y_pred, cls))
    k = len(per_class)
    return EvalReport(
        accuracy=accuracy,
        precision=sum(r.precision for r in per_class.values()) / k,
        recall=sum(r.recall for r in per_class.values()) / k,
        f1=sum(r.f1 for r in per_class.values()) / k,
        fpr=sum(r.fpr for r in per_class.values()) / k,
        per_class=per_class,
        sample_count=len(y_true),
    )


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """BP * exp(sum w_n log p_n) with uniform weights and a single reference.

    Modified precision clips candidate n-gram counts by the reference's. Any
    order with p_n = 0 gets add-one smoothing on numerator and denominator
    (deviation from the raw formula, which is undefined at log 0).
    """
    if not reference:
        raise UsageError("reference must be non-empty")
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        ref_counts = _ngrams(reference, n)
        matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        total = max(len(candidate) - n + 1, 0)
        if matches == 0:
            p = (matches + 1) / (total + 1)
        else:
            p = matches / total
        log_sum += math.log(p) / max_n
    if len(candidate) > len(reference):
        bp = 1.0
    else:
        bp = math.exp(1.0 - len(reference) / len(candidate))
    return bp * math.exp(log_sum)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence via the standard DP table."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str], beta: float = 1.0) -> float:
    """(1 + beta^2) * LCS / (ref_len + beta^2 * cand_len), exactly as defined."""
    if not reference:
        raise UsageError("reference must be non-empty")
    if not candidate:
        return 0.0
    lcs = lcs_length(candidate, reference)
    return (1.0 + beta ** 2) * lcs / (len(reference) + beta ** 2 * len(candidate))


@dataclass(frozen=True)
class JudgeItem:
    item_id: str
    recommendation: str
    context: str
    generator_model: str


@dataclass(frozen=True)
class JudgeScore:
    per_item: tuple[tuple[str, int, int, int], ...]  # (item_id, reasoning, relevance, usefulness)
    mean: float
    dimension_means: dict[str, float]
    unscored: int

    def to_json(self) -> dict:
        return {
            "per_item": [
                {"item_id": i, "reasoning": r, "relevance": v, "usefulness": u}
                for i, r, v, u in self.per_item
            ],
            "mean": self.mean,
            "dimension_means": self.dimension_means,
            "unscored": self.unscored,
        }


def _judge_prompt(item: JudgeItem, feedback: str = "") -> Prompt:
    blocks = [("ticket", item.context), ("recommendation", item.recommendation)]
    if feedback:
        blocks.append(("format_error", feedback))
    user = (
        f"{JUDGE_MARKER} above for reasoning quality, action relevance, and overall "
        'usefulness, each an integer 0-10, as strict JSON with the keys "reasoning", '
        '"relevance", and "usefulness".'
    )
    return Prompt(
        system="You are an independent quality judge for SOC recommendations.",
        user=user,
        context_blocks=tuple(blocks),
    )


def judge_scores(
    items: Sequence[JudgeItem],
    judge: ProviderConfig,
    registry: ProviderRegistry,
) -> JudgeScore:
    """Score each recommendation on three 0-10 dimensions with an independent
    judge model. The judge must differ from every generator; unparseable items
    (after one repair) are excluded from the means with a warning count."""
    generators = {item.generator_model for item in items}
    if judge.model_id in generators:
        raise UsageError(f"judge model {judge.model_id!r} also generated items under evaluation")
    scored: list[tuple[str, int, int, int]] = []
    unscored = 0
    for item in items:
        feedback = ""
        result = None
        for _ in range(2):
            completion = complete(judge, _judge_prompt(item, feedback), registry)
            try:
                doc = extract_json_object(completion.text)
                values = []
                for key in ("reasoning", "relevance", "usefulness"):
                    value = int(doc[key])
                    if not 0 <= value <= 10:
                        raise ClassificationError(f"{key}={value} outside 0-10")
                    values.append(value)
                result = (item.item_id, values[0], values[1], values[2])
                break
            except (ClassificationError, KeyError, TypeError, ValueError) as exc:
                feedback = f"Previous reply was rejected: {exc}. Reply with strict JSON only."
        if result is None:
            unscored += 1
        else:
            scored.append(result)
    if scored:
        mean = sum(u for _, _, _, u in scored) / len(scored)
        dims = {
            "reasoning": sum(r for _, r, _, _ in scored) / len(scored),
            "relevance": sum(v for _, _, v, _ in scored) / len(scored),
            "usefulness": sum(u for _, _, _, u in scored) / len(scored),
        }
    else:
        mean = 0.0
        dims = {"reasoning": 0.0, "relevance": 0.0, "usefulness": 0.0}
    return JudgeScore(per_item=tuple(scored), mean=mean, dimension_means=dims, unscored=unscored)


SETTINGS = ("no_sqm", "with_sqm", "ensemble_with_sqm")


@dataclass
class ResolutionHarness:
    """Everything the experiment runner needs to drive resolution."""

    primary: ProviderConfig
    secondary: ProviderConfig
    registry: ProviderRegistry
    judge: ProviderConfig
    context_fn: Callable[[IncidentTicket], list[tuple[str, str]]]
    evidence_fn: Callable[[IncidentTicket], EvidenceBlock | None]
    weights: tuple[float, float] = (0.6, 0.4)
    trace_dir: Path | None = None
    per_ticket_s: list[float] = field(default_factory=list)  # filled by the runner


@dataclass(frozen=True)
class ExperimentResult:
    report: EvalReport
    judge: JudgeScore
    trace_path: Path | None


def run_resolution_experiment(
    tickets: Sequence[IncidentTicket],
    setting: str,
    harness: ResolutionHarness,
) -> ExperimentResult:
    """Drive the resolution module under one of the three evidence settings and
    report classification metrics plus judge scores with a per-ticket trace."""
    if not tickets:
        raise UsageError("experiment needs at least one ticket")
    if setting not in SETTINGS:
        raise UsageError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    if any(t.ground_truth_code is None for t in tickets):
        raise UsageError("every experiment ticket must carry a ground-truth code")
    if harness.judge.model_id in (harness.primary.model_id, harness.secondary.model_id):
        raise UsageError("judge model must come from outside the generator pair")

    outputs: list[ResolutionOutput] = []
    traces: list[dict[str, Any]] = []
    for ticket in tickets:
        tick = time.perf_counter()
        try:
            context = harness.context_fn(ticket)
            evidence = harness.evidence_fn(ticket) if setting != "no_sqm" else None
            if setting == "ensemble_with_sqm":
                first = classify_resolution(ticket, context, evidence, harness.primary, harness.registry)
                second = classify_resolution(ticket, context, evidence, harness.secondary, harness.registry)
                weighted = list(zip((first, second), harness.weights))
                code = weighted_ensemble(weighted)
                lead = max(weighted, key=lambda pair: pair[1])[0]
                output = ResolutionOutput(
                    code=code,
                    justification=lead.justification,
                    actions=lead.actions,
                    evidence_refs=lead.evidence_refs,
                    model_id=f"ensemble({harness.primary.model_id},{harness.secondary.model_id})",
                )
            else:
                output = classify_resolution(ticket, context, evidence, harness.primary, harness.registry)
        except Exception as exc:
            exc.args = (f"ticket {ticket.ticket_id}: {exc}",)
            raise
        harness.per_ticket_s.append(time.perf_counter() - tick)
        outputs.append(output)
        traces.append({
            "ticket_id": ticket.ticket_id,
            "setting": setting,
            "predicted": output.code.value,
            "truth": ticket.ground_truth_code.value,
            "correct": output.code == ticket.ground_truth_code,
            "model_id": output.model_id,
        })

    report = classification_report(
        [t.ground_truth_code for t in tickets], [o.code for o in outputs]
    )
    items = [
        JudgeItem(
            item_id=t.ticket_id,
            recommendation=json.dumps(o.to_json(), sort_keys=True),
            context=f"offense_category: {t.offense_category}\nseverity: {t.severity:g}",
            generator_model=o.model_id,
        )
        for t, o in zip(tickets, outputs)
    ]
    judge = judge_scores(items, harness.judge, harness.registry)

    trace_path = None
    if harness.trace_dir is not None:
        harness.trace_dir.mkdir(parents=True, exist_ok=True)
        trace_path = harness.trace_dir / f"resolution_{setting}.jsonl"
        with open(trace_path, "w", encoding="utf-8") as fh:
            for trace in traces:
                fh.write(json.dumps(trace, sort_keys=True) + "\n")
    return ExperimentResult(report=report, judge=judge, trace_path=trace_path)
