from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from soctriage.errors import (
    AuthError,
    PromptTooLargeError,
    TransportError,
    UnparseableVerdictError,
    UsageError,
)
from soctriage.gateway import (
    Completion,
    HttpProvider,
    MockProvider,
    Prompt,
    ProviderConfig,
    ProviderRegistry,
    ScriptedProvider,
    complete,
    parse_verdict,
    render_detection_prompt,
)
from soctriage.ingest import generate_corpus


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps: list[float] = []

    def clock(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.now += seconds


def cfg(**kwargs) -> ProviderConfig:
    base = dict(provider_id="p1", model_id="m1")
    base.update(kwargs)
    return ProviderConfig(**base)


def registry_with(provider, provider_id="p1") -> ProviderRegistry:
    registry = ProviderRegistry()
    registry.register(provider_id, provider)
    return registry


class TestRenderDetectionPrompt:
    def test_contains_instruction_token_and_event_id(self):
        event = generate_corpus(1, 1.0, seed=0)[0]
        text = render_detection_prompt(event).rendered()
        assert "CRITICAL" in text
        assert event.id in text

    def test_magnitude_rendered_as_integer_when_whole(self):
        event = generate_corpus(1, 1.0, seed=0)[0]
        event.magnitude = 8.0
        assert "magnitude: 8" in render_detection_prompt(event).rendered()

    def test_distinct_events_distinct_prompts(self):
        events = generate_corpus(50, 0.4, seed=4)
        digests = {render_detection_prompt(e).digest() for e in events}
        assert len(digests) == len(events)


class TestComplete:
    def test_mock_same_prompt_twice_identical(self):
        registry = registry_with(MockProvider())
        prompt = Prompt(system="s", user="u")
        a = complete(cfg(), prompt, registry)
        b = complete(cfg(), prompt, registry)
        assert a.text == b.text

    def test_mock_stable_across_instances(self):
        prompt = Prompt(system="s", user="u")
        a = complete(cfg(), prompt, registry_with(MockProvider()))
        b = complete(cfg(), prompt, registry_with(MockProvider()))
        assert a.text == b.text  # pure function of (model_id, prompt)

    def test_retry_exhaustion_counts_attempts(self):
        provider = ScriptedProvider([TransportError("t"), TransportError("t"), TransportError("t")])
        fake = FakeClock()
        with pytest.raises(TransportError):
            complete(cfg(max_retries=2), Prompt(system="s", user="u"),
                     registry_with(provider), sleep=fake.sleep, clock=fake.clock)
        assert provider.calls == 3

    def test_recovers_after_transient_failure(self):
        provider = ScriptedProvider([TransportError("t"), "ok"])
        fake = FakeClock()
        result = complete(cfg(), Prompt(system="s", user="u"),
                          registry_with(provider), sleep=fake.sleep, clock=fake.clock)
        assert result.text == "ok"
        assert provider.calls == 2

    def test_auth_error_not_retried(self):
        provider = ScriptedProvider([AuthError("bad key"), "never"])
        with pytest.raises(AuthError):
            complete(cfg(), Prompt(system="s", user="u"), registry_with(provider))
        assert provider.calls == 1

    def test_oversized_prompt_zero_attempts(self):
        provider = ScriptedProvider(["never"])
        with pytest.raises(PromptTooLargeError):
            complete(cfg(max_prompt_chars=10), Prompt(system="s" * 50, user="u"),
                     registry_with(provider))
        assert provider.calls == 0

    def test_backoff_budget_bounded(self):
        # With a fake clock: total blocked time <= attempts * timeout + backoff sum.
        timeout_ms, retries, base = 100, 2, 50

        class SlowFailure:
            def send(self, c, p):
                fake.now += timeout_ms / 1000.0  # provider blocks up to its timeout
                raise TransportError("timeout")

        fake = FakeClock()
        with pytest.raises(TransportError):
            complete(cfg(timeout_ms=timeout_ms, max_retries=retries, backoff_base_ms=base),
                     Prompt(system="s", user="u"), registry_with(SlowFailure()),
                     sleep=fake.sleep, clock=fake.clock)
        budget = (retries + 1) * timeout_ms / 1000.0 + sum(base * 2 ** i for i in range(retries)) / 1000.0
        assert fake.now <= budget + 1e-9
        assert fake.sleeps == [0.05, 0.1]

    def test_latency_is_measured(self):
        fake = FakeClock()

        class Timed:
            def send(self, c, p):
                fake.now += 0.25
                return "done"

        result = complete(cfg(), Prompt(system="s", user="u"), registry_with(Timed()),
                          sleep=fake.sleep, clock=fake.clock)
        assert result.latency_ms == pytest.approx(250.0)

    def test_negative_latency_rejected(self):
        with pytest.raises(UsageError):
            Completion(text="x", provider_id="p", latency_ms=-1)


class TestRegistry:
    def test_duplicate_id_rejected(self):
        registry = ProviderRegistry()
        registry.register("a", MockProvider())
        with pytest.raises(UsageError):
            registry.register("a", MockProvider())

    def test_unknown_id_rejected(self):
        with pytest.raises(UsageError):
            ProviderRegistry().get("missing")


class TestParseVerdict:
    def test_critical_with_confidence(self):
        assert parse_verdict("CRITICAL (0.87)") == (True, 0.87)

    def test_noncritical_defaults_confidence(self):
        assert parse_verdict("non-critical") == (False, 0.5)

    def test_no_token_raises(self):
        with pytest.raises(UnparseableVerdictError):
            parse_verdict("I think maybe")

    def test_non_critical_not_mistaken_for_critical(self):
        label, _ = parse_verdict("The event is NON-CRITICAL (0.9)")
        assert label is False

    def test_confidence_clamped(self):
        assert parse_verdict("CRITICAL (7)") == (True, 1.0)

    @given(
        label=st.booleans(),
        confidence=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        prefix=st.sampled_from(["", "Verdict: ", "After review the event is "]),
    )
    @settings(max_examples=60)
    def test_round_trip(self, label, confidence, prefix):
        text = f"{prefix}{'CRITICAL' if label else 'NON-CRITICAL'} ({confidence:.4f})"
        parsed_label, parsed_confidence = parse_verdict(text)
        assert parsed_label == label
        assert parsed_confidence == pytest.approx(round(confidence, 4))


class TestHttpProvider:
    class Response:
        def __init__(self, status_code=200, content="hello"):
            self.status_code = status_code
            self._content = content

        def json(self):
            return {"choices": [{"message": {"content": self._content}}]}

    def test_posts_chat_shape_and_reads_content(self):
        seen = {}

        def post_fn(url, json=None, headers=None, timeout=None):
            seen.update(url=url, body=json, headers=headers, timeout=timeout)
            return self.Response()

        provider = HttpProvider(post_fn=post_fn)
        text = provider.send(cfg(endpoint="https://api.example/v1/chat"), Prompt(system="sys", user="ask"))
        assert text == "hello"
        assert seen["url"] == "https://api.example/v1/chat"
        assert seen["body"]["model"] == "m1"
        assert seen["body"]["messages"][0]["role"] == "system"

    def test_missing_api_key_env_is_auth_error(self, monkeypatch):
        monkeypatch.delenv("SOCTRIAGE_TEST_KEY", raising=False)
        provider = HttpProvider(post_fn=lambda *a, **k: self.Response())
        with pytest.raises(AuthError):
            provider.send(cfg(endpoint="https://x", api_key_env="SOCTRIAGE_TEST_KEY"),
                          Prompt(system="s", user="u"))

    def test_http_401_is_auth_error(self):
        provider = HttpProvider(post_fn=lambda *a, **k: self.Response(status_code=401))
        with pytest.raises(AuthError):
            provider.send(cfg(endpoint="https://x"), Prompt(system="s", user="u"))

    def test_http_500_is_transport_error(self):
        provider = HttpProvider(post_fn=lambda *a, **k: self.Response(status_code=500))
        with pytest.raises(TransportError):
            provider.send(cfg(endpoint="https://x"), Prompt(system="s", user="u"))

    def test_body_template_substitution(self):
        seen = {}

        def post_fn(url, json=None, headers=None, timeout=None):
            seen.update(body=json)
            return self.Response()

        template = {"model_name": "{model}", "input": {"sys": "{system}", "text": "{user}"},
                    "temp": "{temperature}"}
        provider = HttpProvider(body_template=template, post_fn=post_fn)
        provider.send(cfg(endpoint="https://x", temperature=0.0), Prompt(system="sys", user="ask"))
        assert seen["body"]["model_name"] == "m1"
        assert seen["body"]["input"]["sys"] == "sys"
        assert seen["body"]["temp"] == 0.0
