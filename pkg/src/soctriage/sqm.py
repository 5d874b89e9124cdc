"""Syntax-Query-Metadata pipeline: executable-query generation for two SIEMs.

Three context sources anchor generation: platform syntax allow-lists acting as
hard constraints, documentation excerpts retrieved from a plain-text knowledge
base, and exemplar queries retrieved by metadata embedding. Completions pass
through deterministic extraction and a token/clause validator.

The validator is a token- and clause-level approximation of executability,
not a grammar parse: a passing report means every bare word is allow-listed,
quoted/bracketed names and literals aside, clause heads appear in the
configured order, and delimiters balance. Bare unknown words never pass
(conservative: false rejection is preferred over a false executability
claim). The only exception is a bare word immediately following a declared
identifier introducer (``AS`` in AQL, ``rule`` in YARA-L), which is an
identifier by grammar position.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import (
    ConfigError,
    DataIntegrityError,
    ExtractionError,
    GenerationError,
    ProviderError,
    UsageError,
)
from .gateway import Prompt, ProviderConfig, ProviderRegistry, QUERY_MARKER, complete
from .retrieval import EmbeddingProvider, VectorIndex

PLATFORMS = ("qradar_aql", "secops_yaral")


def data_path() -> Path:
    return Path(str(resources.files("soctriage"))) / "data"


@dataclass(frozen=True)
class AllowList:
    platform: str
    keywords: frozenset[str]
    functions: frozenset[str]
    fields: frozenset[str]
    clause_order: tuple[str, ...]
    identifier_introducers: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.platform not in PLATFORMS:
            raise ConfigError(f"unknown platform {self.platform!r}")
        for name in ("keywords", "functions", "fields"):
            if not getattr(self, name):
                raise ConfigError(f"allow-list {name} must be non-empty")
        heads = [h.casefold() for h in self.clause_order]
        if len(heads) != len(set(heads)):
            raise ConfigError("clause_order contains duplicate clause heads")

    @property
    def allowed(self) -> frozenset[str]:
        tokens = set()
        for group in (self.keywords, self.functions, self.fields):
            tokens.update(t.casefold() for t in group)
        for head in self.clause_order:
            tokens.update(t.casefold() for t in head.split())
        return frozenset(tokens)


def load_allowlist(platform: str, source_file: str | Path) -> AllowList:
    try:
        doc = json.loads(Path(source_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read allow-list {source_file}: {exc}") from exc
    if doc.get("platform") != platform:
        raise ConfigError(f"allow-list file declares platform {doc.get('platform')!r}, expected {platform!r}")
    try:
        return AllowList(
            platform=platform,
            keywords=frozenset(doc["keywords"]),
            functions=frozenset(doc["functions"]),
            fields=frozenset(doc["fields"]),
            clause_order=tuple(doc["clause_order"]),
            identifier_introducers=frozenset(doc.get("identifier_introducers", [])),
        )
    except KeyError as exc:
        raise ConfigError(f"allow-list file missing key {exc}") from exc


def load_shipped_allowlist(platform: str) -> AllowList:
    return load_allowlist(platform, data_path() / "allowlists" / f"{platform}.json")


@dataclass(frozen=True)
class Violation:
    kind: str  # unknown_token | clause_order | unbalanced_delimiter | empty
    token: str
    position: int

    def to_json(self) -> dict:
        return {"kind": self.kind, "token": self.token, "position": self.position}


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[Violation, ...]

    def __post_init__(self):
        if self.passed != (len(self.violations) == 0):
            raise UsageError("passed must mirror an empty violation list")

    def to_json(self) -> dict:
        return {"passed": self.passed, "violations": [v.to_json() for v in self.violations]}

    @classmethod
    def from_json(cls, doc: dict) -> "ValidationReport":
        return cls(
            passed=doc["passed"],
            violations=tuple(Violation(**v) for v in doc["violations"]),
        )


@dataclass(frozen=True)
class Token:
    kind: str  # word | identifier | literal | structural
    text: str
    position: int


_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?[A-Za-z]*")
_VARIABLE_RE = re.compile(r"[$%][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*")
_BRACKET_NAME_RE = re.compile(r"\[([\w .$-]+)\]")
_TWO_CHAR_OPS = ("<=", ">=", "!=", "<>", "==")
_ONE_CHAR_OPS = set("=<>+-*/%,;:|.!")
_OPENERS = {"(": ")", "{": "}", "[": "]"}
_CLOSERS = {v: k for k, v in _OPENERS.items()}


def tokenize(text: str) -> tuple[list[Token], list[Violation]]:
    """Lex a query into classified tokens, reporting delimiter problems.

    String literals ('...' and `...`) are literals; double-quoted and
    single-word-bracketed names are identifiers; $/% variables are
    identifiers; numbers (with optional unit suffix like 5m) are literals.
    Characters outside the grammar surface are unknown_token violations.
    """
    tokens: list[Token] = []
    violations: list[Violation] = []
    stack: list[tuple[str, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in ("'", '"', "`"):
            j = i + 1
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    j += 2
                    continue
                if text[j] == ch:
                    break
                j += 1
            if j >= n:
                violations.append(Violation("unbalanced_delimiter", ch, i))
                break
            kind = "identifier" if ch == '"' else "literal"
            tokens.append(Token(kind, text[i:j + 1], i))
            i = j + 1
            continue
        if ch == "[":
            m = _BRACKET_NAME_RE.match(text, i)
            if m:
                tokens.append(Token("identifier", m.group(0), i))
                i = m.end()
                continue
        if ch in _OPENERS:
            stack.append((ch, i))
            tokens.append(Token("structural", ch, i))
            i += 1
            continue
        if ch in _CLOSERS:
            if stack and stack[-1][0] == _CLOSERS[ch]:
                stack.pop()
            else:
                violations.append(Violation("unbalanced_delimiter", ch, i))
            tokens.append(Token("structural", ch, i))
            i += 1
            continue
        m = _VARIABLE_RE.match(text, i)
        if m and len(m.group(0)) > 1:
            tokens.append(Token("identifier", m.group(0), i))
            i = m.end()
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(Token("literal", m.group(0), i))
            i = m.end()
            continue
        m = _WORD_RE.match(text, i)
        if m:
            tokens.append(Token("word", m.group(0), i))
            i = m.end()
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("structural", two, i))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("structural", ch, i))
            i += 1
            continue
        violations.append(Violation("unknown_token", ch, i))
        i += 1
    for opener, pos in stack:
        violations.append(Violation("unbalanced_delimiter", opener, pos))
    return tokens, violations


def _clause_head_positions(tokens: list[Token], clause_order: tuple[str, ...]) -> list[tuple[int, Token]]:
    """Occurrences of clause heads as (order index, starting token), matching
    multi-word heads against consecutive tokens, longest head first."""
    heads = sorted(
        ((tuple(h.casefold().split()), idx) for idx, h in enumerate(clause_order)),
        key=lambda item: -len(item[0]),
    )
    found: list[tuple[int, Token]] = []
    i = 0
    while i < len(tokens):
        if tokens[i].kind != "word":
            i += 1
            continue
        for head_tokens, order_idx in heads:
            window = tokens[i:i + len(head_tokens)]
            if len(window) == len(head_tokens) and all(
                t.kind == "word" and t.text.casefold() == h for t, h in zip(window, head_tokens)
            ):
                found.append((order_idx, tokens[i]))
                i += len(head_tokens)
                break
        else:
            i += 1
    return found


def validate_query(query_text: str, allowlist: AllowList) -> ValidationReport:
    """Token/clause-level executability proxy. Total: failures are report entries."""
    if not query_text or not query_text.strip():
        return ValidationReport(passed=False, violations=(Violation("empty", "", 0),))
    tokens, violations = tokenize(query_text)
    allowed = allowlist.allowed
    introducers = {t.casefold() for t in allowlist.identifier_introducers}
    prev_word: str | None = None
    for token in tokens:
        if token.kind == "word":
            folded = token.text.casefold()
            if folded not in allowed and prev_word not in introducers:
                violations.append(Violation("unknown_token", token.text, token.position))
            prev_word = folded
        else:
            # The introducer exception only covers a directly adjacent word.
            prev_word = None
    heads = _clause_head_positions(tokens, allowlist.clause_order)
    highest = -1
    for order_idx, token in heads:
        if order_idx < highest:
            violations.append(Violation("clause_order", token.text, token.position))
        highest = max(highest, order_idx)
    violations.sort(key=lambda v: (v.position, v.kind))
    return ValidationReport(passed=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class MetadataRecord:
    query_id: str
    name: str
    category: str
    subcategory: str
    use_case: str
    description: str
    tags: tuple[str, ...] = ()
    search_keywords: tuple[str, ...] = ()

    def text(self) -> str:
        return " | ".join([
            self.name, self.category, self.subcategory, self.use_case,
            self.description, ", ".join(self.tags), ", ".join(self.search_keywords),
        ])

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id, "name": self.name, "category": self.category,
            "subcategory": self.subcategory, "use_case": self.use_case,
            "description": self.description, "tags": list(self.tags),
            "search_keywords": list(self.search_keywords),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MetadataRecord":
        return cls(
            query_id=doc["query_id"], name=doc["name"], category=doc["category"],
            subcategory=doc["subcategory"], use_case=doc["use_case"],
            description=doc["description"], tags=tuple(doc.get("tags", [])),
            search_keywords=tuple(doc.get("search_keywords", [])),
        )


def load_query_repo(path: str | Path) -> dict[str, str]:
    """JSON-lines of {query_id, platform, query} -> query_id -> query text."""
    repo: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            repo[doc["query_id"]] = doc["query"]
    return repo


def load_metadata(path: str | Path) -> list[MetadataRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(MetadataRecord.from_json(json.loads(line)))
    return records


def index_metadata(
    records: list[MetadataRecord],
    embedder: EmbeddingProvider,
    repo: dict[str, str] | None = None,
) -> VectorIndex:
    """Embed each record's concatenated descriptor text; payload carries the record."""
    index = VectorIndex(dim=embedder.dim)
    for record in records:
        if repo is not None and record.query_id not in repo:
            raise ConfigError(f"metadata {record.query_id!r} references a missing repo entry")
        index.upsert(record.query_id, embedder.embed(record.text()), record.to_json())
    return index


def retrieve_exemplars(
    question: str,
    index: VectorIndex,
    repo: dict[str, str],
    k: int,
    embedder: EmbeddingProvider,
) -> list[tuple[MetadataRecord, str, float]]:
    """Top-k metadata hits joined to their stored queries, similarity descending."""
    if len(index) == 0:
        return []
    hits = index.top_k(embedder.embed(question), k)
    out = []
    for entry_id, similarity, payload in hits:
        record = MetadataRecord.from_json(payload)
        if record.query_id not in repo:
            raise DataIntegrityError(f"repo has no query for metadata id {record.query_id!r}")
        out.append((record, repo[record.query_id], similarity))
    return out


def assemble_sqm_prompt(
    question: str,
    platform: str,
    allowlist: AllowList,
    doc_excerpts: list[str],
    exemplars: list[tuple[MetadataRecord, str, float]],
) -> Prompt:
    """Context blocks in fixed order (syntax, documentation, exemplars,
    question); empty blocks say "none" rather than disappearing."""
    syntax_lines = [
        f"platform: {platform}",
        "keywords: " + ", ".join(sorted(allowlist.keywords)),
        "functions: " + ", ".join(sorted(allowlist.functions)),
        "fields: " + ", ".join(sorted(allowlist.fields)),
        "clause order: " + " < ".join(allowlist.clause_order),
    ]
    doc_text = "\n---\n".join(doc_excerpts) if doc_excerpts else "none"
    if exemplars:
        parts = []
        for i, (record, query, similarity) in enumerate(exemplars, start=1):
            parts.append(
                f"Exemplar {i} (id={record.query_id}, similarity={similarity:.3f}): {record.use_case}\n"
                f"```\n{query}\n```"
            )
        exemplar_text = "\n".join(parts)
    else:
        exemplar_text = "none"
    return Prompt(
        system="You write syntactically valid SIEM queries under hard syntax constraints.",
        user=f"{QUERY_MARKER} for the question above, with no commentary before or after it.",
        context_blocks=(
            ("syntax", "\n".join(syntax_lines)),
            ("documentation", doc_text),
            ("exemplars", exemplar_text),
            ("question", question),
        ),
    )


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_COMMENT_PREFIXES = ("--", "//", "#")


def extract_query(completion_text: str, clause_heads: tuple[str, ...]) -> str:
    """Deterministic extraction: first fenced block if any, then leading prose
    stripped until a line starting with a clause head or ``rule``, then
    trailing comment lines trimmed."""
    text = completion_text
    fence = _FENCE_RE.search(text)
    if fence:
        text = fence.group(1)
    starters = {h.split()[0].casefold() for h in clause_heads} | {"rule"}
    lines = text.splitlines()
    start = 0
    for i, line in enumerate(lines):
        first = line.strip().split(" ", 1)[0].casefold() if line.strip() else ""
        if first in starters:
            start = i
            break
    else:
        raise ExtractionError("no line starts with a clause head", raw_completion=completion_text)
    lines = lines[start:]
    while lines and (not lines[-1].strip() or lines[-1].strip().startswith(_COMMENT_PREFIXES)):
        lines.pop()
    result = "\n".join(lines).strip()
    if not result:
        raise ExtractionError("extraction produced an empty query", raw_completion=completion_text)
    return result


@dataclass(frozen=True)
class GeneratedQuery:
    platform: str
    question: str
    query_text: str
    exemplar_ids: tuple[str, ...]
    validation: ValidationReport
    prompt_digest: str
    provider_id: str

    def to_json(self) -> dict:
        return {
            "platform": self.platform,
            "question": self.question,
            "query_text": self.query_text,
            "exemplar_ids": list(self.exemplar_ids),
            "validation": self.validation.to_json(),
            "provenance": {"prompt_digest": self.prompt_digest, "provider_id": self.provider_id},
        }


@dataclass
class SqmEngine:
    """Loaded state for one platform: allow-list, repositories, indices, provider."""

    platform: str
    allowlist: AllowList
    metadata_index: VectorIndex
    repo: dict[str, str]
    doc_index: VectorIndex
    embedder: EmbeddingProvider
    provider: ProviderConfig
    registry: ProviderRegistry
    exemplar_k: int = 3
    doc_k: int = 3
    repair_rounds: int = 1

    @classmethod
    def build(
        cls,
        platform: str,
        provider: ProviderConfig,
        registry: ProviderRegistry,
        embedder: EmbeddingProvider,
        data_dir: str | Path | None = None,
        exemplar_k: int = 3,
        doc_k: int = 3,
        repair_rounds: int = 1,
    ) -> "SqmEngine":
        if platform not in PLATFORMS:
            raise UsageError(f"unknown platform {platform!r}")
        root = Path(data_dir) if data_dir else data_path()
        allowlist = load_allowlist(platform, root / "allowlists" / f"{platform}.json")
        repo = load_query_repo(root / "repo" / f"{platform}_queries.jsonl")
        records = load_metadata(root / "repo" / f"{platform}_metadata.jsonl")
        metadata_index = index_metadata(records, embedder, repo=repo)
        from .retrieval import index_documents

        doc_file = root / "docs" / f"{platform}.txt"
        doc_index = index_documents(
            [(doc_file.stem, doc_file.read_text(encoding="utf-8"))], embedder,
            size_tokens=120, overlap_tokens=20,
        )
        return cls(
            platform=platform, allowlist=allowlist, metadata_index=metadata_index,
            repo=repo, doc_index=doc_index, embedder=embedder, provider=provider,
            registry=registry, exemplar_k=exemplar_k, doc_k=doc_k, repair_rounds=repair_rounds,
        )

    def retrieve_docs(self, question: str) -> list[str]:
        if len(self.doc_index) == 0 or self.doc_k <= 0:
            return []
        hits = self.doc_index.top_k(self.embedder.embed(question), self.doc_k)
        return [payload["text"] for _, _, payload in hits]

    def generate(self, question: str, repair: bool | None = None) -> GeneratedQuery:
        rounds = self.repair_rounds if repair is None else (self.repair_rounds if repair else 0)
        if self.exemplar_k > 0 and len(self.metadata_index) > 0:
            exemplars = retrieve_exemplars(
                question, self.metadata_index, self.repo, self.exemplar_k, self.embedder
            )
        else:
            exemplars = []
        doc_excerpts = self.retrieve_docs(question)
        prompt = assemble_sqm_prompt(question, self.platform, self.allowlist, doc_excerpts, exemplars)

        report: ValidationReport | None = None
        query_text = ""
        digest = prompt.digest()
        for attempt in range(rounds + 1):
            if attempt > 0:
                feedback = "\n".join(
                    f"- {v.kind}: {v.token!r} at position {v.position}" for v in report.violations
                )
                prompt = Prompt(
                    system=prompt.system,
                    user=prompt.user,
                    context_blocks=prompt.context_blocks + (
                        ("violations", "The previous query failed validation; fix these:\n" + feedback),
                    ),
                )
                digest = prompt.digest()
            try:
                completion = complete(self.provider, prompt, self.registry)
            except ProviderError as exc:
                raise GenerationError(f"provider failed while generating query: {exc}") from exc
            try:
                query_text = extract_query(completion.text, self.allowlist.clause_order)
            except ExtractionError as exc:
                raise GenerationError(
                    f"could not extract a query: {exc}", raw_completion=completion.text
                ) from exc
            report = validate_query(query_text, self.allowlist)
            if report.passed:
                break
        return GeneratedQuery(
            platform=self.platform,
            question=question,
            query_text=query_text,
            exemplar_ids=tuple(record.query_id for record, _, _ in exemplars),
            validation=report,
            prompt_digest=digest,
            provider_id=self.provider.provider_id,
        )


def generate_query(question: str, platform: str, engine: SqmEngine, repair: bool = True) -> GeneratedQuery:
    if engine.platform != platform:
        raise UsageError(f"engine is loaded for {engine.platform!r}, not {platform!r}")
    return engine.generate(question, repair=repair)
