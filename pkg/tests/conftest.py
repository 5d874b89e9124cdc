from __future__ import annotations

import pytest

from soctriage.gateway import MockProvider, ProviderConfig, ProviderRegistry
from soctriage.retrieval import HashedBowEmbedder


@pytest.fixture
def embedder():
    return HashedBowEmbedder(dim=64)


@pytest.fixture
def mock_registry():
    registry = ProviderRegistry()
    for pid in ("mock-alpha", "mock-beta", "mock-gamma", "mock-judge", "mock-sqm",
                "mock-resolver-a", "mock-resolver-b"):
        registry.register(pid, MockProvider())
    return registry


def provider(provider_id: str, model_id: str | None = None, **kwargs) -> ProviderConfig:
    return ProviderConfig(provider_id=provider_id, model_id=model_id or provider_id, **kwargs)
