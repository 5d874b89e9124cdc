"""Constrained incident-resolution classification with historical RAG.

Closure is a decision-support task over a closed set of exactly seven
resolution codes. The model sees a structured ticket rendering (ground truth
always excluded), retrieved historical closures and runbook guidance, and
optionally an SQM-derived evidence block; it must answer with one strict JSON
object. Nothing outside the 7-code set ever escapes this module.

At desk scale, evidence "results" come from a simulated executor that
pattern-matches queries against the synthetic corpus; the interface isolates
it so a real SIEM executor can be swapped in.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

from .errors import (
    ClassificationError,
    DataLeakageError,
    EvidenceRejectedError,
    InvalidCodeError,
    SchemaError,
    UsageError,
)
from .gateway import Prompt, ProviderConfig, ProviderRegistry, RESOLUTION_MARKER, complete
from .ingest import LogEvent
from .retrieval import EmbeddingProvider, VectorIndex
from .sqm import GeneratedQuery


class ResolutionCode(str, Enum):
    BENIGN_POSITIVE = "BenignPositive"
    EXTERNAL_ATTACK_UNSUCCESSFUL = "ExternalAttackUnsuccessful"
    EXTERNAL_ATTACK_SUCCESSFUL = "ExternalAttackSuccessful"
    INSIDER_THREAT_UNSUCCESSFUL = "InsiderThreatUnsuccessful"
    INSIDER_THREAT_SUCCESSFUL = "InsiderThreatSuccessful"
    ESCALATED_NO_RESPONSE = "EscalatedNoResponse"
    FALSE_POSITIVE = "FalsePositive"


_NORMALIZED_CODES = {re.sub(r"[^a-z0-9]", "", c.value.lower()): c for c in ResolutionCode}


def parse_code(text: str) -> ResolutionCode:
    """Case- and separator-insensitive match against the closed 7-value set."""
    key = re.sub(r"[^a-z0-9]", "", str(text).lower())
    if key not in _NORMALIZED_CODES:
        raise InvalidCodeError(f"{text!r} is not one of the 7 resolution codes")
    return _NORMALIZED_CODES[key]


@dataclass
class IncidentTicket:
    ticket_id: str
    offense_category: str
    severity: float
    opened_at: datetime
    closed_at: datetime | None = None
    source_attrs: dict[str, Any] = field(default_factory=dict)
    dest_attrs: dict[str, Any] = field(default_factory=dict)
    flow_stats: dict[str, float] = field(default_factory=dict)
    credibility: float = 0.0
    analyst_notes: str = ""
    ground_truth_code: ResolutionCode | None = None
    ground_truth_notes: str = ""

    def __post_init__(self):
        if self.closed_at is not None and self.closed_at < self.opened_at:
            raise SchemaError(f"ticket {self.ticket_id}: closed_at precedes opened_at")

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "ticket_id": self.ticket_id,
            "offense_category": self.offense_category,
            "severity": self.severity,
            "opened_at": self.opened_at.astimezone(timezone.utc).isoformat(),
            "source_attrs": self.source_attrs,
            "dest_attrs": self.dest_attrs,
            "flow_stats": self.flow_stats,
            "credibility": self.credibility,
            "analyst_notes": self.analyst_notes,
        }
        if self.closed_at is not None:
            doc["closed_at"] = self.closed_at.astimezone(timezone.utc).isoformat()
        if self.ground_truth_code is not None:
            doc["ground_truth_code"] = self.ground_truth_code.value
        if self.ground_truth_notes:
            doc["ground_truth_notes"] = self.ground_truth_notes
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "IncidentTicket":
        def ts(raw):
            return datetime.fromisoformat(raw.replace("Z", "+00:00")) if raw else None

        return cls(
            ticket_id=str(doc["ticket_id"]),
            offense_category=str(doc.get("offense_category", "")),
            severity=float(doc.get("severity", 0)),
            opened_at=ts(doc["opened_at"]),
            closed_at=ts(doc.get("closed_at")),
            source_attrs=dict(doc.get("source_attrs", {})),
            dest_attrs=dict(doc.get("dest_attrs", {})),
            flow_stats=dict(doc.get("flow_stats", {})),
            credibility=float(doc.get("credibility", 0)),
            analyst_notes=str(doc.get("analyst_notes", "")),
            ground_truth_code=parse_code(doc["ground_truth_code"]) if doc.get("ground_truth_code") else None,
            ground_truth_notes=str(doc.get("ground_truth_notes", "")),
        )


def load_tickets(path: str | Path) -> list[IncidentTicket]:
    tickets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tickets.append(IncidentTicket.from_json(json.loads(line)))
    return tickets


def save_tickets(tickets: Sequence[IncidentTicket], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tickets:
            fh.write(json.dumps(t.to_json(), sort_keys=True) + "\n")


def convert_servicenow(record: dict, mapping: dict[str, str]) -> IncidentTicket:
    """Map a ServiceNow-style export row onto the ticket schema.

    ``mapping`` takes export column names to ticket field names; unmapped
    columns are dropped. Dotted targets like ``source_attrs.ip`` populate the
    attribute maps.
    """
    doc: dict[str, Any] = {}
    for src, dst in mapping.items():
        if src not in record:
            continue
        if "." in dst:
            group, key = dst.split(".", 1)
            doc.setdefault(group, {})[key] = record[src]
        else:
            doc[dst] = record[src]
    return IncidentTicket.from_json(doc)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, "g")
    return str(value)


def render_ticket(ticket: IncidentTicket) -> str:
    """Deterministic field-labeled rendering; ground-truth fields excluded."""
    lines = [
        f"ticket_id: {ticket.ticket_id}",
        f"offense_category: {ticket.offense_category}",
        f"severity: {_fmt(ticket.severity)}",
        f"opened_at: {ticket.opened_at.astimezone(timezone.utc).isoformat()}",
    ]
    if ticket.closed_at is not None:
        lines.append(f"closed_at: {ticket.closed_at.astimezone(timezone.utc).isoformat()}")
    for label, attrs in (("source", ticket.source_attrs), ("destination", ticket.dest_attrs)):
        for key in sorted(attrs):
            lines.append(f"{label}.{key}: {_fmt(attrs[key])}")
    for key in sorted(ticket.flow_stats):
        lines.append(f"flow.{key}: {_fmt(ticket.flow_stats[key])}")
    lines.append(f"credibility: {_fmt(ticket.credibility)}")
    if ticket.analyst_notes:
        lines.append(f"analyst_notes: {ticket.analyst_notes}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ResolutionOutput:
    code: ResolutionCode
    justification: str
    actions: tuple[str, ...]
    evidence_refs: tuple[str, ...] = ()
    model_id: str = ""

    def __post_init__(self):
        if not self.actions:
            raise UsageError("actions must be non-empty")

    def to_json(self) -> dict:
        # The wire form carries exactly these three keys.
        return {"code": self.code.value, "justification": self.justification, "actions": list(self.actions)}


@dataclass(frozen=True)
class EvidenceBlock:
    entries: tuple[tuple[str, str, str, str], ...]  # (question, query_text, platform, result_summary)

    def render(self) -> str:
        parts = []
        for question, query_text, platform, summary in self.entries:
            parts.append(
                f"question: {question}\nplatform: {platform}\nquery:\n{query_text}\nresult: {summary}"
            )
        return "\n---\n".join(parts) if parts else "none"


class SimulatedExecutor:
    """Toy query executor for desk-scale evidence summaries.

    Matches quoted literals and magnitude comparisons from the query text
    against a synthetic corpus and reports match counts. Stands in for the
    live SIEM execution this artifact cannot reach.
    """

    _LITERAL_RE = re.compile(r"['\"`]([^'\"`]{2,})['\"`]")
    _MAG_RE = re.compile(r"magnitude\s*(>=|>|=)\s*([0-9.]+)")

    def __init__(self, corpus: Sequence[LogEvent]):
        self.corpus = list(corpus)

    def run(self, query_text: str) -> str:
        literals = [lit.lower() for lit in self._LITERAL_RE.findall(query_text)]
        mag = self._MAG_RE.search(query_text)
        matched = []
        for event in self.corpus:
            haystack = (event.message + " " + " ".join(str(v) for v in event.fields.values())).lower()
            literal_hit = any(lit in haystack for lit in literals) if literals else False
            mag_hit = False
            if mag:
                op, bound = mag.group(1), float(mag.group(2))
                mag_hit = event.magnitude >= bound if op in (">=", ">") else event.magnitude == bound
            if literal_hit or mag_hit:
                matched.append(event)
        if not matched:
            return f"0 of {len(self.corpus)} events matched"
        peak = max(e.magnitude for e in matched)
        return f"{len(matched)} of {len(self.corpus)} events matched; peak magnitude {_fmt(peak)}"


def attach_evidence(
    ticket: IncidentTicket,
    queries: Sequence[GeneratedQuery],
    executor: SimulatedExecutor,
) -> EvidenceBlock:
    """Admit only validation-passing queries and summarize their results."""
    entries = []
    for query in queries:
        if not query.validation.passed:
            kinds = ", ".join(v.kind for v in query.validation.violations)
            raise EvidenceRejectedError(
                f"query for {ticket.ticket_id} failed validation ({kinds}); not admissible as evidence"
            )
        entries.append((query.question, query.query_text, query.platform, executor.run(query.query_text)))
    return EvidenceBlock(entries=tuple(entries))


def build_history_index(
    closed: Sequence[IncidentTicket], embedder: EmbeddingProvider
) -> VectorIndex:
    """Embed rendered closed tickets; payload carries the closure for grounding."""
    index = VectorIndex(dim=embedder.dim)
    for ticket in closed:
        if ticket.ground_truth_code is None:
            raise UsageError(f"historical ticket {ticket.ticket_id} has no closure code")
        text = render_ticket(ticket)
        index.upsert(ticket.ticket_id, embedder.embed(text), {
            "ticket_id": ticket.ticket_id,
            "text": text,
            "code": ticket.ground_truth_code.value,
            "notes": ticket.ground_truth_notes,
        })
    return index


def build_runbook_index(runbook_dir: str | Path, embedder: EmbeddingProvider) -> VectorIndex:
    from .retrieval import index_documents

    docs = []
    for path in sorted(Path(runbook_dir).glob("*.txt")):
        docs.append((path.stem, path.read_text(encoding="utf-8")))
    return index_documents(docs, embedder, size_tokens=120, overlap_tokens=20)


def build_rag_context(
    ticket: IncidentTicket,
    history_index: VectorIndex,
    runbook_index: VectorIndex,
    k: int,
    embedder: EmbeddingProvider,
) -> list[tuple[str, str]]:
    """Top-k historical closures and runbook excerpts for the rendered ticket.

    Raises if the ticket itself is in the history index (train/test leakage).
    """
    if ticket.ticket_id in history_index:
        raise DataLeakageError(f"ticket {ticket.ticket_id} is present in the history index")
    if k <= 0:
        return []
    query = embedder.embed(render_ticket(ticket))
    blocks: list[tuple[str, str]] = []
    for _, similarity, payload in history_index.top_k(query, k) if len(history_index) else []:
        blocks.append((
            "historical",
            f"(similarity {similarity:.3f}) past ticket {payload['ticket_id']} closed as "
            f"{payload['code']}\n{payload['text']}",
        ))
    for _, similarity, payload in runbook_index.top_k(query, k) if len(runbook_index) else []:
        blocks.append(("runbook", f"(similarity {similarity:.3f}) {payload['text']}"))
    return blocks


def extract_json_object(text: str) -> dict:
    """First balanced top-level brace span, parsed. Models wrap JSON in prose."""
    start = text.find("{")
    if start == -1:
        raise ClassificationError(f"no JSON object in {text!r}")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                try:
                    return json.loads(text[start:i + 1])
                except json.JSONDecodeError as exc:
                    raise ClassificationError(f"unparseable JSON object: {exc}") from exc
    raise ClassificationError("unbalanced braces in completion")


_CODE_LIST = ", ".join(c.value for c in ResolutionCode)


def resolution_prompt(
    ticket: IncidentTicket,
    context: list[tuple[str, str]],
    evidence: EvidenceBlock | None,
    feedback: str = "",
) -> Prompt:
    blocks: list[tuple[str, str]] = [("ticket", render_ticket(ticket))]
    blocks.extend(context)
    if evidence is not None:
        blocks.append(("evidence", evidence.render()))
    blocks.append(("codes", _CODE_LIST))
    if feedback:
        blocks.append(("format_error", feedback))
    user = (
        f"{RESOLUTION_MARKER} from the codes block and respond with a single strict JSON "
        'object with exactly the keys "code", "justification", and "actions" '
        "(a non-empty list of recommended steps)."
    )
    return Prompt(
        system="You are a senior SOC analyst closing incident tickets consistently.",
        user=user,
        context_blocks=tuple(blocks),
    )


def classify_resolution(
    ticket: IncidentTicket,
    context: list[tuple[str, str]],
    evidence: EvidenceBlock | None,
    provider: ProviderConfig,
    registry: ProviderRegistry,
    evidence_refs: Sequence[str] = (),
) -> ResolutionOutput:
    """Constrained classification with one repair round on malformed output."""
    feedback = ""
    last_error: Exception | None = None
    for _ in range(2):
        prompt = resolution_prompt(ticket, context, evidence, feedback)
        completion = complete(provider, prompt, registry)
        try:
            doc = extract_json_object(completion.text)
            code = parse_code(doc["code"])
            justification = str(doc.get("justification", ""))
            actions = [str(a) for a in doc.get("actions", []) if str(a).strip()]
            if not actions:
                raise ClassificationError("actions list is empty")
            return ResolutionOutput(
                code=code,
                justification=justification,
                actions=tuple(actions),
                evidence_refs=tuple(evidence_refs),
                model_id=provider.model_id,
            )
        except (ClassificationError, InvalidCodeError, KeyError) as exc:
            last_error = exc
            feedback = f"Previous reply was rejected: {exc}. Reply with strict JSON only."
    if isinstance(last_error, InvalidCodeError):
        raise last_error
    raise ClassificationError(
        f"ticket {ticket.ticket_id}: output unparseable after repair: {last_error}"
    )


def weighted_ensemble(outputs: Sequence[tuple[ResolutionOutput, float]]) -> ResolutionCode:
    """Weight-summed vote over codes.

    Ties break to the code of the highest-weighted individual output among the
    tied codes, then lexicographically. The argmax is invariant under positive
    rescaling of all weights.
    """
    if not outputs:
        raise UsageError("weighted_ensemble needs at least one output")
    if any(w <= 0 for _, w in outputs):
        raise UsageError("weights must be positive")
    scores: dict[ResolutionCode, float] = {}
    for output, weight in outputs:
        scores[output.code] = scores.get(output.code, 0.0) + weight
    best = max(scores.values())
    tied = [code for code, score in scores.items() if score == best]
    if len(tied) == 1:
        return tied[0]
    top_weight = max(w for out, w in outputs if out.code in tied)
    top_codes = sorted(
        {out.code for out, w in outputs if out.code in tied and w == top_weight},
        key=lambda c: c.value,
    )
    return top_codes[0]


def grid_search_weights(
    validation: Sequence[tuple[IncidentTicket, ResolutionCode]],
    predictors: Sequence[Callable[[IncidentTicket], ResolutionOutput]],
    step: float = 0.05,
) -> tuple[float, float]:
    """Accuracy-maximizing (w1, 1-w1) over the step grid; ties take the
    smallest w1. Per-model predictions are computed once and cached."""
    if not validation:
        raise UsageError("validation set must be non-empty")
    if len(predictors) != 2:
        raise UsageError("grid search pairs exactly 2 predictors")
    steps = 1.0 / step
    if abs(steps - round(steps)) > 1e-9:
        raise UsageError(f"step {step} must divide 1 evenly")
    cached: list[list[ResolutionOutput]] = [
        [predict(ticket) for ticket, _ in validation] for predict in predictors
    ]
    best_pair = (0.0, 1.0)
    best_accuracy = -1.0
    for i in range(int(round(steps)) + 1):
        w1 = i * step
        w2 = 1.0 - w1
        correct = 0
        for j, (_, truth) in enumerate(validation):
            votes = []
            if w1 > 0:
                votes.append((cached[0][j], w1))
            if w2 > 0:
                votes.append((cached[1][j], w2))
            if weighted_ensemble(votes) == truth:
                correct += 1
        accuracy = correct / len(validation)
        if accuracy > best_accuracy + 1e-12:
            best_accuracy = accuracy
            best_pair = (w1, w2)
    return best_pair


_CATEGORY_TRUTH = {
    "phishing": ResolutionCode.EXTERNAL_ATTACK_UNSUCCESSFUL,
    "brute_force": ResolutionCode.EXTERNAL_ATTACK_UNSUCCESSFUL,
    "intrusion": ResolutionCode.EXTERNAL_ATTACK_SUCCESSFUL,
    "insider_misuse": ResolutionCode.INSIDER_THREAT_UNSUCCESSFUL,
    "data_theft": ResolutionCode.INSIDER_THREAT_SUCCESSFUL,
    "unresponsive_host": ResolutionCode.ESCALATED_NO_RESPONSE,
    "benign_scan": ResolutionCode.BENIGN_POSITIVE,
    "misconfigured_rule": ResolutionCode.FALSE_POSITIVE,
}


def generate_tickets(n: int, seed: int) -> list[IncidentTicket]:
    """Synthetic desk-scale tickets with ground-truth closures derived from the
    offense category, mirroring how production closures correlate with offense
    type."""
    if n <= 0:
        raise UsageError("n must be positive")
    rng = random.Random(seed)
    categories = list(_CATEGORY_TRUTH)
    base = datetime(2024, 2, 1, tzinfo=timezone.utc)
    tickets = []
    for i in range(n):
        category = categories[i % len(categories)]
        opened = base + timedelta(hours=rng.randrange(24 * 60))
        tickets.append(IncidentTicket(
            ticket_id=f"tkt-{i:04d}",
            offense_category=category,
            severity=float(rng.randint(2, 10)),
            opened_at=opened,
            closed_at=opened + timedelta(hours=rng.randint(1, 72)),
            source_attrs={
                "ip": f"198.51.100.{rng.randint(1, 254)}",
                "host": f"host-{rng.randint(1, 40):02d}",
                "user": f"user{rng.randint(1, 60):03d}",
            },
            dest_attrs={"ip": f"10.0.{rng.randint(0, 8)}.{rng.randint(1, 254)}"},
            flow_stats={
                "flows": rng.randint(1, 400),
                "bytes": rng.randint(500, 5_000_000),
                "events": rng.randint(1, 120),
            },
            credibility=float(rng.randint(1, 10)),
            analyst_notes="automated enrichment pending review",
            ground_truth_code=_CATEGORY_TRUTH[category],
            ground_truth_notes="historical closure per offense-type runbook",
        ))
    return tickets
