"""Three-provider majority-vote detection, composite risk scoring, and the
ranked triage queue.

Abstentions (unparseable verdicts, transport failures) are non-votes. A 1-1
split after one abstention resolves toward critical: in SOC practice a false
positive costs analyst minutes, a missed threat costs much more.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import NoQuorumError, ProviderError, UnparseableVerdictError, UsageError
from .gateway import ProviderConfig, ProviderRegistry, complete, parse_verdict, render_detection_prompt
from .ingest import LogEvent


@dataclass(frozen=True)
class Vote:
    provider_id: str
    label: bool
    confidence: float


@dataclass(frozen=True)
class DetectionVerdict:
    event_id: str
    votes: tuple[Vote, ...]
    ensemble_label: bool
    criticality_prob: float
    risk_score: float

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "votes": [
                {"provider_id": v.provider_id, "label": v.label, "confidence": v.confidence}
                for v in self.votes
            ],
            "ensemble_label": self.ensemble_label,
            "criticality_prob": self.criticality_prob,
            "risk_score": self.risk_score,
        }


@dataclass(frozen=True)
class TriageQueue:
    entries: tuple[tuple[str, float, bool], ...]  # (event_id, risk_score, ensemble_label)
    generated_at: datetime

    def to_json(self) -> dict:
        return {
            "generated_at": self.generated_at.astimezone(timezone.utc).isoformat(),
            "entries": [
                {"event_id": eid, "risk_score": risk, "ensemble_label": label}
                for eid, risk, label in self.entries
            ],
        }

    def to_csv(self) -> str:
        lines = ["event_id,risk_score,ensemble_label"]
        lines.extend(f"{eid},{risk:.6f},{str(label).lower()}" for eid, risk, label in self.entries)
        return "\n".join(lines) + "\n"


def risk_score(magnitude: float, p: float, mag_max: float = 10.0) -> float:
    """Composite risk = (magnitude / mag_max) * p.

    Multiplicative so zero probability annihilates and no weights need tuning.
    """
    if mag_max <= 0:
        raise UsageError("mag_max must be positive")
    if not 0.0 <= magnitude <= mag_max:
        raise UsageError(f"magnitude {magnitude} outside [0, {mag_max}]")
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"p {p} outside [0, 1]")
    return (magnitude / mag_max) * p


def majority_label(votes: list[Vote]) -> bool:
    """Strict majority of cast votes; an even split resolves to critical."""
    if not votes:
        raise NoQuorumError("no cast votes")
    critical = sum(1 for v in votes if v.label)
    non_critical = len(votes) - critical
    if critical == non_critical:
        return True
    return critical > non_critical


def combine_votes(votes: list[Vote], magnitude: float, mag_max: float, event_id: str) -> DetectionVerdict:
    """Assemble a verdict from cast votes: majority label, mean-of-majority
    confidence expressed as probability-of-critical, multiplicative risk."""
    label = majority_label(votes)
    agreeing = [v for v in votes if v.label == label]
    prob_critical = [v.confidence if v.label else 1.0 - v.confidence for v in agreeing]
    p = sum(prob_critical) / len(prob_critical)
    return DetectionVerdict(
        event_id=event_id,
        votes=tuple(votes),
        ensemble_label=label,
        criticality_prob=p,
        risk_score=risk_score(magnitude, p, mag_max),
    )


def ensemble_detect(
    event: LogEvent,
    providers: list[ProviderConfig],
    registry: ProviderRegistry,
    mag_max: float = 10.0,
) -> DetectionVerdict:
    """Query exactly three providers concurrently and fuse their verdicts.

    Parse failures and transport errors become abstentions; all three
    abstaining is a no-quorum error.
    """
    if len(providers) != 3:
        raise UsageError(f"ensemble requires exactly 3 providers, got {len(providers)}")
    prompt = render_detection_prompt(event)

    def ask(cfg: ProviderConfig) -> Vote | None:
        try:
            completion = complete(cfg, prompt, registry)
            label, confidence = parse_verdict(completion.text)
            return Vote(provider_id=cfg.provider_id, label=label, confidence=confidence)
        except (ProviderError, UnparseableVerdictError):
            return None

    with ThreadPoolExecutor(max_workers=3) as pool:
        results = list(pool.map(ask, providers))
    votes = [v for v in results if v is not None]
    if not votes:
        raise NoQuorumError(f"all providers abstained on event {event.id}")
    return combine_votes(votes, event.magnitude, mag_max, event.id)


def rank_queue(verdicts: list[DetectionVerdict], now: datetime | None = None) -> TriageQueue:
    """Critical verdicts sorted by risk descending, ties by event id ascending."""
    critical = [v for v in verdicts if v.ensemble_label]
    critical.sort(key=lambda v: (-v.risk_score, v.event_id))
    return TriageQueue(
        entries=tuple((v.event_id, v.risk_score, v.ensemble_label) for v in critical),
        generated_at=now or datetime.now(timezone.utc),
    )
