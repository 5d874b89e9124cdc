"""Log-record parsing, preprocessing, feature building, and synthetic corpora.

Everything here is pure given (input, config, seed): preprocessing is
idempotent and ordering is fully deterministic, so repeated runs over the same
corpus produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptyCorpusError, ParseError, SchemaError, UsageError
from .retrieval import EmbeddingProvider

Scalar = str | int | float | bool

_CORE_KEYS = {"id", "timestamp", "vendor", "category", "magnitude", "fields", "nested", "message", "label"}


@dataclass
class LogEvent:
    """One SIEM record. ``magnitude`` sits on a configured [0, mag_max] scale."""

    id: str
    timestamp: datetime
    vendor: str = ""
    category: str = ""
    magnitude: float = 0.0
    fields: dict[str, Scalar] = field(default_factory=dict)
    nested: dict[str, Any] = field(default_factory=dict)
    message: str = ""
    label: bool | None = None

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
            "vendor": self.vendor,
            "category": self.category,
            "magnitude": self.magnitude,
            "fields": self.fields,
            "nested": self.nested,
            "message": self.message,
        }
        if self.label is not None:
            doc["label"] = self.label
        return doc


@dataclass(frozen=True)
class PreprocessConfig:
    numeric_impute: str = "median"
    categorical_impute: str = "mode"
    text_impute: str = "empty"
    normalization: str = "minmax"  # or "zscore"
    embed_text: bool = False
    embed_dim: int = 32
    dedupe_keys: tuple[str, ...] = ("vendor", "category", "message")
    mag_max: float = 10.0
    business_start: int = 9
    business_end: int = 17
    # Categorical columns up to this many distinct training values are
    # one-hot encoded (plus an __other__ bucket); wider ones are frequency
    # encoded to keep dimensionality bounded.
    max_onehot_cardinality: int = 32

    def __post_init__(self):
        if self.embed_dim <= 0:
            raise UsageError("embed_dim must be positive")
        if not self.dedupe_keys:
            raise UsageError("dedupe_keys must be non-empty")
        if self.normalization not in ("minmax", "zscore"):
            raise UsageError(f"unknown normalization {self.normalization!r}")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "PreprocessConfig":
        if "dedupe_keys" in doc:
            doc = dict(doc, dedupe_keys=tuple(doc["dedupe_keys"]))
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "PreprocessConfig":
        path = Path(path)
        if path.suffix == ".toml":
            import tomli

            doc = tomli.loads(path.read_text(encoding="utf-8"))
        else:
            doc = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(doc)


@dataclass
class FeatureMatrix:
    feature_names: list[str]
    rows: np.ndarray
    labels: np.ndarray | None = None  # aligned bools

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.feature_names):
            raise UsageError("rows shape does not match feature_names")
        if not np.all(np.isfinite(self.rows)):
            raise UsageError("feature matrix contains NaN/Inf")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool)
            if self.labels.shape[0] != self.rows.shape[0]:
                raise UsageError("labels not aligned with rows")


def _parse_timestamp(raw: Any) -> datetime:
    if isinstance(raw, (int, float)):
        if not math.isfinite(raw):
            raise SchemaError(f"non-finite timestamp {raw!r}")
        return datetime.fromtimestamp(float(raw), tz=timezone.utc)
    if not isinstance(raw, str) or not raw:
        raise SchemaError(f"unparseable timestamp {raw!r}")
    text = raw.replace("Z", "+00:00") if raw.endswith("Z") else raw
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise SchemaError(f"unparseable timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _coerce_scalar(text: str) -> Scalar:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _event_from_mapping(doc: dict[str, Any]) -> LogEvent:
    if "id" not in doc or doc["id"] in (None, ""):
        raise SchemaError("record is missing required field 'id'")
    if "timestamp" not in doc or doc["timestamp"] in (None, ""):
        raise SchemaError("record is missing required field 'timestamp'")
    nested = dict(doc.get("nested") or {})
    for key, value in doc.items():
        if key not in _CORE_KEYS:
            nested[key] = value
    fields = doc.get("fields") or {}
    if not isinstance(fields, dict):
        raise SchemaError("'fields' must be a flat map")
    label = doc.get("label")
    if label is not None and not isinstance(label, bool):
        if isinstance(label, (int, float)) and label in (0, 1):
            label = bool(label)
        elif isinstance(label, str) and label.lower() in ("true", "false"):
            label = label.lower() == "true"
        else:
            raise SchemaError(f"uninterpretable label {label!r}")
    magnitude = doc.get("magnitude", 0.0)
    try:
        magnitude = float(magnitude)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"magnitude {magnitude!r} is not a number") from exc
    if not math.isfinite(magnitude) or magnitude < 0:
        raise SchemaError(f"magnitude {magnitude!r} out of range")
    return LogEvent(
        id=str(doc["id"]),
        timestamp=_parse_timestamp(doc["timestamp"]),
        vendor=str(doc.get("vendor", "") or ""),
        category=str(doc.get("category", "") or ""),
        magnitude=magnitude,
        fields=dict(fields),
        nested=nested,
        message=str(doc.get("message", "") or ""),
        label=label,
    )


def event_from_json(doc: dict[str, Any]) -> LogEvent:
    """Build a LogEvent from an already-parsed JSON object."""
    return _event_from_mapping(doc)


def parse_log_record(
    raw: str,
    format: str,
    header: Sequence[str] | None = None,
    line_no: int | None = None,
) -> LogEvent:
    """Parse one raw record. Unknown fields land in ``nested``.

    CSV records need the column ``header``; values are coerced to
    int/float/bool where they look like one.
    """
    if format == "jsonl":
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON record: {exc.msg}", line=line_no, offset=exc.pos) from exc
        if not isinstance(doc, dict):
            raise ParseError("JSON record is not an object", line=line_no)
        return _event_from_mapping(doc)
    if format == "csv":
        if header is None:
            raise UsageError("CSV parsing requires the header column list")
        try:
            row = next(csv.reader(io.StringIO(raw)))
        except (csv.Error, StopIteration) as exc:
            raise ParseError(f"malformed CSV record: {exc}", line=line_no) from exc
        if len(row) != len(header):
            raise ParseError(
                f"CSV record has {len(row)} values for {len(header)} columns", line=line_no
            )
        doc = {key: _coerce_scalar(value) for key, value in zip(header, row) if value != ""}
        return _event_from_mapping(doc)
    raise UsageError(f"unknown format {format!r}")


def load_events(path: str | Path, format: str | None = None) -> list[LogEvent]:
    """Load a JSON-lines or CSV-with-header corpus; format inferred from suffix."""
    path = Path(path)
    fmt = format or ("csv" if path.suffix == ".csv" else "jsonl")
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        if fmt == "csv":
            lines = fh.read().splitlines()
            if not lines:
                raise EmptyCorpusError(f"{path} is empty")
            header = next(csv.reader(io.StringIO(lines[0])))
            for i, line in enumerate(lines[1:], start=2):
                if line.strip():
                    events.append(parse_log_record(line, "csv", header=header, line_no=i))
        else:
            for i, line in enumerate(fh, start=1):
                if line.strip():
                    events.append(parse_log_record(line, "jsonl", line_no=i))
    return events


def save_events(events: Iterable[LogEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event.to_json(), sort_keys=True) + "\n")


def _dedupe_value(event: LogEvent, key: str) -> Any:
    if key in ("id", "vendor", "category", "message", "magnitude"):
        return getattr(event, key)
    if key == "timestamp":
        return event.timestamp.isoformat()
    if key in event.fields:
        return event.fields[key]
    flat = flatten_nested(event)
    return flat.get(key)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def preprocess(events: list[LogEvent], cfg: PreprocessConfig) -> list[LogEvent]:
    """Dedupe, impute, and deterministically order a corpus.

    Duplicates (equal on ``cfg.dedupe_keys``) keep the earliest timestamp, then
    the lexicographically smallest id. Missing field values are imputed with
    the corpus median (numeric) or mode (categorical, ties to the smallest
    value); a missing message becomes the empty string. Output is sorted by
    (timestamp, id). Idempotent.
    """
    if not events:
        raise EmptyCorpusError("preprocess requires a non-empty corpus")

    survivors: dict[tuple, LogEvent] = {}
    for event in events:
        key = tuple(repr(_dedupe_value(event, k)) for k in cfg.dedupe_keys)
        kept = survivors.get(key)
        if kept is None or (event.timestamp, event.id) < (kept.timestamp, kept.id):
            survivors[key] = event
    deduped = sorted(survivors.values(), key=lambda e: (e.timestamp, e.id))

    # Field-level imputation over the union of keys seen in the corpus. A key
    # is numeric only if every present value is a number.
    all_keys: set[str] = set()
    for event in deduped:
        all_keys.update(event.fields)
    impute_values: dict[str, Scalar] = {}
    for key in sorted(all_keys):
        present = [e.fields[key] for e in deduped if e.fields.get(key) is not None]
        if not present:
            continue
        if all(_is_number(v) for v in present):
            impute_values[key] = float(np.median([float(v) for v in present]))
        else:
            counts: dict[str, int] = {}
            for v in present:
                counts[str(v)] = counts.get(str(v), 0) + 1
            top = max(counts.values())
            impute_values[key] = min(k for k, c in counts.items() if c == top)

    out = []
    for event in deduped:
        fields = dict(event.fields)
        changed = False
        for key, fill in impute_values.items():
            if fields.get(key) is None:
                fields[key] = fill
                changed = True
        message = event.message if event.message is not None else ""
        if changed or message is not event.message:
            event = replace(event, fields=fields, message=message)
        out.append(event)
    return out


def flatten_nested(event: LogEvent) -> dict[str, Scalar]:
    """Flatten ``event.nested``: path segments joined with '.', lists indexed."""
    flat: dict[str, Scalar] = {}

    def walk(prefix: str, value: Any) -> None:
        if isinstance(value, dict):
            for key in value:
                walk(f"{prefix}.{key}" if prefix else str(key), value[key])
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                walk(f"{prefix}.{i}" if prefix else str(i), item)
        else:
            flat[prefix] = value

    walk("", event.nested)
    return flat


def temporal_features(
    timestamp: datetime, business_start: int = 9, business_end: int = 17
) -> dict[str, float]:
    """Calendar features in UTC; day_of_week follows Monday=0 .. Sunday=6."""
    ts = timestamp.astimezone(timezone.utc)
    dow = ts.weekday()
    return {
        "hour_of_day": float(ts.hour),
        "day_of_week": float(dow),
        "is_weekend": 1.0 if dow >= 5 else 0.0,
        "is_business_hours": 1.0 if business_start <= ts.hour < business_end else 0.0,
    }


_OTHER = "__other__"


class FeatureEncoder:
    """Learns a feature schema from a training corpus and applies it later.

    Categorical values are one-hot encoded against the training vocabulary with
    an ``__other__`` bucket, so the column set never drifts at inference time.
    Numeric columns remember their training min/max (or mean/std) and their
    median for transform-time gaps.
    """

    def __init__(self, cfg: PreprocessConfig, embedder: EmbeddingProvider | None = None):
        if cfg.embed_text and embedder is None:
            raise UsageError("embed_text requires an embedding provider")
        self.cfg = cfg
        self.embedder = embedder
        self.numeric_cols: list[str] = []
        self.categorical_vocab: dict[str, list[str]] = {}
        self.frequency_tables: dict[str, dict[str, float]] = {}
        self._norm_params: dict[str, tuple[float, float]] = {}
        self._fill: dict[str, float] = {}
        self.feature_names: list[str] = []

    def _raw_features(self, event: LogEvent) -> tuple[dict[str, float], dict[str, str]]:
        numeric: dict[str, float] = {"magnitude": float(event.magnitude)}
        numeric.update(temporal_features(event.timestamp, self.cfg.business_start, self.cfg.business_end))
        categorical: dict[str, str] = {"vendor": event.vendor, "category": event.category}
        for source, prefix in ((event.fields, "field"), (flatten_nested(event), "nested")):
            for key in source:
                value = source[key]
                name = f"{prefix}.{key}"
                if _is_number(value):
                    numeric[name] = float(value)
                elif isinstance(value, bool):
                    numeric[name] = 1.0 if value else 0.0
                elif value is not None:
                    categorical[name] = str(value)
        return numeric, categorical

    def fit(self, events: list[LogEvent]) -> "FeatureEncoder":
        if not events:
            raise EmptyCorpusError("cannot fit encoder on an empty corpus")
        numeric_values: dict[str, list[float]] = {}
        observed: dict[str, list[str]] = {}
        for event in events:
            numeric, categorical = self._raw_features(event)
            for name, value in numeric.items():
                numeric_values.setdefault(name, []).append(value)
            for name, value in categorical.items():
                observed.setdefault(name, []).append(value)
        self.categorical_vocab = {}
        self.frequency_tables = {}
        for name in sorted(observed):
            values = observed[name]
            distinct = sorted(set(values))
            if len(distinct) <= self.cfg.max_onehot_cardinality:
                self.categorical_vocab[name] = distinct
            else:
                total = len(values)
                table: dict[str, float] = {}
                for value in values:
                    table[value] = table.get(value, 0.0) + 1.0
                self.frequency_tables[name] = {v: c / total for v, c in table.items()}
        self.numeric_cols = sorted(numeric_values) + sorted(f"freq.{n}" for n in self.frequency_tables)
        for name in self.numeric_cols:
            if name.startswith("freq."):
                col = np.asarray(list(self.frequency_tables[name[5:]].values()), dtype=np.float64)
            else:
                col = np.asarray(numeric_values[name], dtype=np.float64)
            self._fill[name] = float(np.median(col))
            if self.cfg.normalization == "minmax":
                self._norm_params[name] = (float(col.min()), float(col.max()))
            else:
                self._norm_params[name] = (float(col.mean()), float(col.std()))
        names = list(self.numeric_cols)
        for cat, values in self.categorical_vocab.items():
            names.extend(f"{cat}={v}" for v in values)
            names.append(f"{cat}={_OTHER}")
        if self.cfg.embed_text:
            names.extend(f"emb_{i}" for i in range(self.cfg.embed_dim))
        self.feature_names = names
        return self

    def _normalize(self, name: str, value: float) -> float:
        a, b = self._norm_params[name]
        if self.cfg.normalization == "minmax":
            if b == a:
                return 0.5
            return (value - a) / (b - a)
        if b == 0.0:
            return 0.0
        return (value - a) / b

    def transform(self, events: list[LogEvent]) -> FeatureMatrix:
        if not self.feature_names:
            raise UsageError("encoder is not fitted")
        col_index = {name: i for i, name in enumerate(self.feature_names)}
        rows = np.zeros((len(events), len(self.feature_names)), dtype=np.float64)
        for r, event in enumerate(events):
            numeric, categorical = self._raw_features(event)
            for name in self.numeric_cols:
                if name.startswith("freq."):
                    value = self.frequency_tables[name[5:]].get(categorical.get(name[5:]), 0.0)
                else:
                    value = numeric.get(name, self._fill[name])
                rows[r, col_index[name]] = self._normalize(name, value)
            for cat, values in self.categorical_vocab.items():
                value = categorical.get(cat)
                column = f"{cat}={value}" if value in values else f"{cat}={_OTHER}"
                rows[r, col_index[column]] = 1.0
            if self.cfg.embed_text:
                text = event.message or " "
                try:
                    emb = self.embedder.embed(text if text.strip() else "empty")
                except Exception as exc:
                    raise UsageError(f"embedding failed for event {event.id}: {exc}") from exc
                if emb.dim != self.cfg.embed_dim:
                    raise UsageError(
                        f"embedder dim {emb.dim} != configured embed_dim {self.cfg.embed_dim}"
                    )
                rows[r, col_index["emb_0"]:col_index["emb_0"] + self.cfg.embed_dim] = emb.as_array()
        labels = None
        if all(e.label is not None for e in events) and events:
            labels = np.asarray([e.label for e in events], dtype=bool)
        return FeatureMatrix(feature_names=list(self.feature_names), rows=rows, labels=labels)


def build_feature_matrix(
    events: list[LogEvent], cfg: PreprocessConfig, embedder: EmbeddingProvider | None = None
) -> FeatureMatrix:
    """One-shot fit + transform over a preprocessed corpus."""
    return FeatureEncoder(cfg, embedder).fit(events).transform(events)


_VENDORS = ["palo_alto", "crowdstrike", "azure_ad", "cisco_asa"]
_CATEGORIES = ["authentication", "malware", "network", "policy", "recon"]
_COUNTRIES = ["CA", "US", "DE", "BR", "CN", "RU", "NL"]

_CRITICAL_MESSAGES = [
    "multiple failed logins followed by success for privileged account",
    "malware beacon detected to known C2 infrastructure",
    "privilege escalation attempt via service account",
    "large outbound transfer to unclassified external host",
    "ransomware file-rename burst observed on file server",
    "credential stuffing burst against VPN gateway",
    "lateral movement via remote service creation",
]
_BENIGN_MESSAGES = [
    "scheduled backup completed successfully",
    "user logon success from corporate subnet",
    "routine policy audit completed",
    "software update applied by management agent",
    "VPN session established from known device",
    "periodic health check heartbeat",
    "DNS lookup for corporate SaaS domain",
]


def _clip(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def generate_corpus(
    n: int, critical_fraction: float, seed: int, mag_max: float = 10.0
) -> list[LogEvent]:
    """Desk-scale synthetic corpus with exactly round(n * critical_fraction)
    critical events and planted, learnable signal (magnitude, counters,
    behavioral score, and message text all shift with the label)."""
    if n <= 0:
        raise UsageError("n must be positive")
    if not 0.0 <= critical_fraction <= 1.0:
        raise UsageError("critical_fraction must lie in [0, 1]")
    rng = random.Random(seed)
    n_critical = round(n * critical_fraction)
    labels = [True] * n_critical + [False] * (n - n_critical)
    rng.shuffle(labels)
    base = datetime(2024, 3, 1, tzinfo=timezone.utc)

    events = []
    for i, critical in enumerate(labels):
        ts = base + timedelta(seconds=rng.randrange(14 * 24 * 3600))
        src_ip = f"10.{rng.randint(0, 3)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"
        user = f"user{rng.randint(1, 60):03d}"
        if critical:
            magnitude = _clip(rng.gauss(7.2, 1.4), 0.0, mag_max)
            failed_logins = max(0, int(rng.gauss(6.0, 2.0)))
            bytes_out = int(abs(rng.gauss(4e7, 2.5e7)))
            behavior_score = _clip(rng.gauss(0.75, 0.12), 0.0, 1.0)
            message = rng.choice(_CRITICAL_MESSAGES)
            category = rng.choice(["authentication", "malware", "network"])
        else:
            magnitude = _clip(rng.gauss(3.2, 1.4), 0.0, mag_max)
            failed_logins = max(0, int(rng.gauss(0.6, 0.9)))
            bytes_out = int(abs(rng.gauss(4e6, 3e6)))
            behavior_score = _clip(rng.gauss(0.30, 0.12), 0.0, 1.0)
            message = rng.choice(_BENIGN_MESSAGES)
            category = rng.choice(_CATEGORIES)
        events.append(LogEvent(
            id=f"ev-{i:06d}",
            timestamp=ts,
            vendor=rng.choice(_VENDORS),
            category=category,
            magnitude=round(magnitude, 3),
            fields={
                "failed_logins": failed_logins,
                "bytes_out": bytes_out,
                "distinct_ports": rng.randint(1, 40 if critical else 8),
                "src_ip": src_ip,
                "user": user,
            },
            nested={
                "meta": {
                    "geo": {"cc": rng.choice(_COUNTRIES)},
                    "asset_criticality": rng.randint(1, 5),
                },
                "behavior": {
                    "score": round(behavior_score, 4),
                    "anomalies": rng.randint(2, 9) if critical else rng.randint(0, 2),
                },
            },
            message=f"{message} [account {user}; source {src_ip}]",
            label=critical,
        ))
    return events
