"""Gateway retry, auth, and mock behavior."""

from __future__ import annotations

import json

import httpx
import pytest

from dilemma_lab.gateway import (
    AuthError,
    ChatExchange,
    GatewayError,
    MalformedResponse,
    ModelEndpoint,
    ProviderKind,
    RetriesExhausted,
    ScheduleExhausted,
    backoff_delays,
    chat_complete,
    mock_endpoint,
    mock_script,
)

KEY_VAR = "DILEMMA_TEST_API_KEY"
SECRET = "sk-super-secret-value"


def live_endpoint(**kw) -> ModelEndpoint:
    defaults = dict(
        provider_kind=ProviderKind.OPENAI_COMPATIBLE,
        model_id="test/model",
        base_url="https://api.example.test/v1/openai",
        api_key_env_var=KEY_VAR,
        max_retries=2,
    )
    defaults.update(kw)
    return ModelEndpoint(**defaults)


def openai_body(text: str) -> dict:
    return {
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 5, "completion_tokens": 2},
    }


def test_mock_endpoint_replays_schedule():
    ep = mock_script("a1", ["one", "two"])
    exchanges: list[ChatExchange] = []
    assert chat_complete(ep, "s", "u", recorder=exchanges.append) == "one"
    assert chat_complete(ep, "s", "u", recorder=exchanges.append) == "two"
    assert [e.response_text for e in exchanges] == ["one", "two"]
    assert all(e.latency_s == 0.0 and e.attempt_count == 1 for e in exchanges)
    with pytest.raises(ScheduleExhausted):
        chat_complete(ep, "s", "u")


def test_mock_requires_schedule_or_fn():
    with pytest.raises(GatewayError):
        mock_endpoint(schedule=[])


def test_mock_never_touches_network():
    def explode(request):  # pragma: no cover - must not run
        raise AssertionError("network transport was used for a mock endpoint")

    ep = mock_endpoint(schedule=["ok"])
    client = httpx.Client(transport=httpx.MockTransport(explode))
    assert chat_complete(ep, "s", "u", client=client) == "ok"


def test_retry_429_then_success(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(request)
        if len(calls) == 1:
            return httpx.Response(429, json={"error": "rate limited"})
        return httpx.Response(200, json=openai_body("hello"))

    slept: list[float] = []
    exchanges: list[ChatExchange] = []
    ep = live_endpoint()
    client = httpx.Client(transport=httpx.MockTransport(handler))
    text = chat_complete(
        ep, "sys", "user", client=client, recorder=exchanges.append, sleep=slept.append
    )
    assert text == "hello"
    assert len(calls) == 2
    assert exchanges[-1].attempt_count == 2
    assert exchanges[0].error == "status 429"
    assert slept == [1.0]


def test_retries_exhausted(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    handler = lambda request: httpx.Response(503, json={})
    ep = live_endpoint(max_retries=2)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    slept: list[float] = []
    with pytest.raises(RetriesExhausted):
        chat_complete(ep, "s", "u", client=client, sleep=slept.append)
    assert slept == [1.0, 2.0]  # non-decreasing backoff


def test_backoff_non_decreasing():
    delays = backoff_delays(8)
    assert delays == sorted(delays)
    assert max(delays) <= 30.0


def test_missing_env_var_fails_before_network(monkeypatch):
    monkeypatch.delenv(KEY_VAR, raising=False)

    def explode(request):  # pragma: no cover
        raise AssertionError("no request should be sent without a key")

    ep = live_endpoint()
    client = httpx.Client(transport=httpx.MockTransport(explode))
    with pytest.raises(AuthError):
        chat_complete(ep, "s", "u", client=client)


def test_auth_status_is_not_retried(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(401, json={})

    ep = live_endpoint()
    client = httpx.Client(transport=httpx.MockTransport(handler))
    with pytest.raises(AuthError):
        chat_complete(ep, "s", "u", client=client)
    assert len(calls) == 1


def test_malformed_response(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    handler = lambda request: httpx.Response(200, json={"nope": True})
    ep = live_endpoint()
    client = httpx.Client(transport=httpx.MockTransport(handler))
    with pytest.raises(MalformedResponse):
        chat_complete(ep, "s", "u", client=client)


def test_anthropic_wire_shape(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["headers"] = dict(request.headers)
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"content": [{"type": "text", "text": "a lesson"}]})

    ep = ModelEndpoint(
        provider_kind=ProviderKind.ANTHROPIC_STYLE,
        model_id="lesson-model",
        base_url="https://api.anthropic.test",
        api_key_env_var=KEY_VAR,
        max_tokens=1024,
    )
    client = httpx.Client(transport=httpx.MockTransport(handler))
    assert chat_complete(ep, "sys", "analyze this", client=client) == "a lesson"
    assert seen["url"].endswith("/v1/messages")
    assert seen["headers"]["x-api-key"] == SECRET
    assert seen["body"]["system"] == "sys"
    assert seen["body"]["messages"] == [{"role": "user", "content": "analyze this"}]


def test_openai_wire_shape_and_usage(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers["authorization"]
        return httpx.Response(200, json=openai_body("ok"))

    exchanges: list[ChatExchange] = []
    ep = live_endpoint(temperature=0.7)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    chat_complete(ep, "sys", "user text", client=client, recorder=exchanges.append)
    assert seen["body"]["model"] == "test/model"
    assert seen["body"]["temperature"] == 0.7
    assert seen["body"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["auth"] == f"Bearer {SECRET}"
    assert exchanges[0].token_usage == {"prompt_tokens": 5, "completion_tokens": 2}


def test_exchanges_never_carry_the_key(monkeypatch):
    monkeypatch.setenv(KEY_VAR, SECRET)
    handler = lambda request: httpx.Response(200, json=openai_body("fine"))
    exchanges: list[ChatExchange] = []
    ep = live_endpoint()
    client = httpx.Client(transport=httpx.MockTransport(handler))
    chat_complete(ep, "s", "u", client=client, recorder=exchanges.append)
    serialized = json.dumps([vars(e) for e in exchanges])
    assert SECRET not in serialized


def test_temperature_validation():
    with pytest.raises(GatewayError):
        live_endpoint(temperature=-0.1)
