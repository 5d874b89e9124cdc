"""Single-file app configuration (TOML or JSON); secrets only via env vars."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, UsageError
from .gateway import ProviderConfig, ProviderRegistry, build_registry
from .ingest import PreprocessConfig
from .retrieval import DEFAULT_DIM, HashedBowEmbedder


@dataclass
class AppConfig:
    providers: list[ProviderConfig] = field(default_factory=list)
    detection_trio: tuple[str, str, str] = ("mock-alpha", "mock-beta", "mock-gamma")
    resolution_primary: str = "mock-resolver-a"
    resolution_secondary: str = "mock-resolver-b"
    resolution_weights: tuple[float, float] = (0.6, 0.4)
    judge_provider: str = "mock-judge"
    sqm_provider: str = "mock-sqm"
    mag_max: float = 10.0
    embedder_kind: str = "fallback"
    embed_dim: int = DEFAULT_DIM
    platform: str = "qradar_aql"
    exemplar_k: int = 3
    doc_k: int = 3
    repair_rounds: int = 1
    rag_k: int = 5
    query_top_n: int = 5
    evidence_per_ticket: int = 3
    store_root: str = "./store"
    host: str = "127.0.0.1"
    port: int = 8080
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)

    def __post_init__(self):
        if not self.providers:
            self.providers = default_providers()
        ids = [p.provider_id for p in self.providers]
        if len(ids) != len(set(ids)):
            raise ConfigError("provider_id values must be unique")
        for pid in (*self.detection_trio, self.resolution_primary,
                    self.resolution_secondary, self.judge_provider, self.sqm_provider):
            if pid not in ids:
                raise ConfigError(f"config references unknown provider {pid!r}")

    def registry(self) -> ProviderRegistry:
        return build_registry(self.providers)

    def provider(self, provider_id: str) -> ProviderConfig:
        for cfg in self.providers:
            if cfg.provider_id == provider_id:
                return cfg
        raise UsageError(f"unknown provider {provider_id!r}")

    def embedder(self) -> HashedBowEmbedder:
        # Selector: "fallback" or "external:<provider_id>". Only the
        # deterministic fallback ships with this build; an external sentence
        # encoder plugs in behind the same EmbeddingProvider protocol.
        if self.embedder_kind == "fallback":
            return HashedBowEmbedder(dim=self.embed_dim)
        if self.embedder_kind.startswith("external:"):
            raise ConfigError(
                f"external embedding provider {self.embedder_kind.split(':', 1)[1]!r} "
                "is not wired in this build; use 'fallback'"
            )
        raise ConfigError(f"unknown embedder selector {self.embedder_kind!r}")

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        path = Path(path)
        if path.suffix == ".toml":
            import tomli

            doc = tomli.loads(path.read_text(encoding="utf-8"))
        else:
            doc = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "AppConfig":
        doc = dict(doc)
        providers = [ProviderConfig(**p) for p in doc.pop("providers", [])]
        preprocess = PreprocessConfig.from_dict(doc.pop("preprocess", {}))
        for key in ("detection_trio", "resolution_weights"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(providers=providers, preprocess=preprocess, **doc)


def default_providers() -> list[ProviderConfig]:
    """Mock-only provider set so the engine runs offline out of the box."""
    return [
        ProviderConfig(provider_id="mock-alpha", model_id="mock-detect-alpha"),
        ProviderConfig(provider_id="mock-beta", model_id="mock-detect-beta"),
        ProviderConfig(provider_id="mock-gamma", model_id="mock-detect-gamma"),
        ProviderConfig(provider_id="mock-resolver-a", model_id="mock-resolve-a"),
        ProviderConfig(provider_id="mock-resolver-b", model_id="mock-resolve-b"),
        ProviderConfig(provider_id="mock-judge", model_id="mock-judge"),
        ProviderConfig(provider_id="mock-sqm", model_id="mock-sqm"),
    ]
