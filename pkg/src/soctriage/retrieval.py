"""Embedding provider abstraction, exact cosine vector index, and document chunking.

The index is an exhaustive-scan store: corpora here are thousands of entries at
most, and exactness is what the retrieval-quality properties assert against.
The fallback embedder is a hashed bag-of-words (signed feature hashing) so the
whole pipeline runs offline and deterministically; an external sentence-encoder
can be plugged in behind the same ``EmbeddingProvider`` protocol.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

import numpy as np

from .errors import UsageError

DEFAULT_DIM = 384

_WORD_RE = re.compile(r"[a-z0-9_]+")


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-L2-norm vector of fixed dimension."""

    values: tuple[float, ...]
    dim: int

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise UsageError(f"vector length {len(self.values)} != dim {self.dim}")
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) >= 1e-6:
            raise UsageError(f"vector is not unit norm (|v| = {norm})")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...


class HashedBowEmbedder:
    """Deterministic fallback embedder: tokens hashed into ``dim`` signed buckets.

    Each token is assigned a bucket and a +/-1 sign from its sha256 digest; the
    bucket accumulates the sign once per occurrence and the result is
    L2-normalized. Identical text therefore always embeds identically, across
    processes and platforms.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise UsageError("embedding dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise UsageError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _WORD_RE.findall(text.lower()):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # No word tokens, or signs cancelled exactly: fall back to a fixed
            # direction so the unit-norm contract still holds.
            vec[0] = 1.0
            norm = 1.0
        vec /= norm
        return EmbeddingVector(values=tuple(float(x) for x in vec), dim=self.dim)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise UsageError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.dot(a.as_array(), b.as_array()))


@dataclass
class IndexEntry:
    id: str
    vector: EmbeddingVector
    payload: Any


@dataclass
class VectorIndex:
    """In-process exact vector index. Writes need exclusive access; reads don't."""

    dim: int
    entries: dict[str, IndexEntry] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self.entries

    def upsert(self, entry_id: str, vector: EmbeddingVector, payload: Any) -> None:
        if vector.dim != self.dim:
            raise UsageError(f"vector dim {vector.dim} != index dim {self.dim}")
        self.entries[entry_id] = IndexEntry(id=entry_id, vector=vector, payload=payload)

    def top_k(self, query: EmbeddingVector, k: int) -> list[tuple[str, float, Any]]:
        """K highest-cosine entries, descending similarity, ties by id ascending."""
        if k < 1:
            raise UsageError("k must be >= 1")
        if query.dim != self.dim:
            raise UsageError(f"query dim {query.dim} != index dim {self.dim}")
        if not self.entries:
            return []
        q = query.as_array()
        scored = [
            (entry.id, float(np.dot(q, entry.vector.as_array())), entry.payload)
            for entry in self.entries.values()
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry_id in sorted(self.entries):
                entry = self.entries[entry_id]
                fh.write(json.dumps({
                    "id": entry.id,
                    "vector": list(entry.vector.values),
                    "payload": entry.payload,
                }, sort_keys=True) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path, dim: int) -> "VectorIndex":
        index = cls(dim=dim)
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                vec = EmbeddingVector(values=tuple(rec["vector"]), dim=dim)
                index.upsert(rec["id"], vec, rec["payload"])
        return index


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    seq: int
    text: str
    token_span: tuple[int, int]


def chunk(doc_id: str, text: str, size_tokens: int, overlap_tokens: int) -> list[Chunk]:
    """Sliding window over whitespace tokens with stride size - overlap.

    Consecutive chunks overlap by exactly ``overlap_tokens`` (except possibly a
    short final chunk); stripping the overlap and concatenating reconstructs
    the original token stream.
    """
    if size_tokens <= overlap_tokens or overlap_tokens < 0:
        raise UsageError("need size_tokens > overlap_tokens >= 0")
    tokens = text.split()
    stride = size_tokens - overlap_tokens
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + size_tokens, len(tokens))
        chunks.append(Chunk(
            doc_id=doc_id,
            seq=len(chunks),
            text=" ".join(tokens[start:end]),
            token_span=(start, end),
        ))
        if end >= len(tokens):
            break
        start += stride
    return chunks


def index_documents(
    docs: Iterable[tuple[str, str]],
    embedder: EmbeddingProvider,
    size_tokens: int = 256,
    overlap_tokens: int = 32,
) -> VectorIndex:
    """Chunk and embed (doc_id, text) pairs into a fresh index keyed by doc_id:seq."""
    index = VectorIndex(dim=embedder.dim)
    for doc_id, text in docs:
        for piece in chunk(doc_id, text, size_tokens, overlap_tokens):
            if not piece.text.strip():
                continue
            index.upsert(
                f"{doc_id}:{piece.seq}",
                embedder.embed(piece.text),
                {"doc_id": doc_id, "seq": piece.seq, "text": piece.text},
            )
    return index
