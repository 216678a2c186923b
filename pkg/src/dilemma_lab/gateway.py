"""HTTP chat-completion clients plus a deterministic mock provider.

Player models speak the OpenAI-compatible chat API; the lesson generator
speaks the Anthropic messages API. API keys come from the environment only
and are never copied into exchanges or logs.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import httpx

BACKOFF_BASE_S = 1.0
BACKOFF_CAP_S = 30.0
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})
AUTH_STATUS = frozenset({401, 403})


class ProviderKind(str, Enum):
    OPENAI_COMPATIBLE = "openai_compatible"
    ANTHROPIC_STYLE = "anthropic_style"
    MOCK = "mock"


class GatewayError(Exception):
    kind = "gateway"


class AuthError(GatewayError):
    kind = "auth"


class RetriesExhausted(GatewayError):
    kind = "exhausted"


class MalformedResponse(GatewayError):
    kind = "malformed"


class ScheduleExhausted(GatewayError):
    kind = "schedule"


@dataclass
class ChatExchange:
    """Record of one provider round-trip (api key already absent)."""

    provider: str
    model_id: str
    system: str
    user: str
    temperature: float
    response_text: str
    latency_s: float
    attempt_count: int
    token_usage: dict | None = None
    error: str | None = None


class MockResponder:
    """Deterministic response source: a fixed schedule or a callable."""

    def __init__(
        self,
        schedule: list[str] | None = None,
        fn: Callable[[int, str, str], str] | None = None,
    ) -> None:
        if not schedule and fn is None:
            raise GatewayError("mock responder needs a non-empty schedule or a function")
        self.schedule = list(schedule) if schedule else None
        self.fn = fn
        self.calls = 0
        self._lock = threading.Lock()

    def next(self, system: str, user: str) -> str:
        with self._lock:
            index = self.calls
            self.calls += 1
        if self.schedule is not None:
            if index >= len(self.schedule):
                raise ScheduleExhausted(f"mock schedule exhausted after {index} calls")
            return self.schedule[index]
        assert self.fn is not None
        return self.fn(index, system, user)


@dataclass
class ModelEndpoint:
    """One chat-completion endpoint and its call policy."""

    provider_kind: ProviderKind
    model_id: str
    base_url: str = ""
    api_key_env_var: str = ""
    temperature: float = 0.7
    max_tokens: int = 2048
    timeout_s: float = 120.0
    max_retries: int = 3
    max_in_flight: int = 4
    responder: MockResponder | None = None
    _gate: threading.BoundedSemaphore = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")
        if self.provider_kind is ProviderKind.MOCK and self.responder is None:
            raise GatewayError("mock endpoint requires a responder")
        self._gate = threading.BoundedSemaphore(self.max_in_flight)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env_var, "") if self.api_key_env_var else ""
        if not key:
            raise AuthError(
                f"api key env var {self.api_key_env_var or '<unset>'} is empty or missing"
            )
        return key


def mock_endpoint(
    model_id: str = "mock",
    schedule: list[str] | None = None,
    fn: Callable[[int, str, str], str] | None = None,
) -> ModelEndpoint:
    return ModelEndpoint(
        provider_kind=ProviderKind.MOCK,
        model_id=model_id,
        responder=MockResponder(schedule=schedule, fn=fn),
    )


def mock_script(agent_id: str, schedule: list[str]) -> ModelEndpoint:
    """Endpoint that replays ``schedule`` verbatim, then errors."""
    return mock_endpoint(model_id=f"mock:{agent_id}", schedule=schedule)


def backoff_delays(attempts: int) -> list[float]:
    """Exponential, capped; non-decreasing by construction."""
    return [min(BACKOFF_BASE_S * 2**i, BACKOFF_CAP_S) for i in range(attempts)]


def _build_request(endpoint: ModelEndpoint, system: str, user: str) -> tuple[str, dict, dict]:
    key = endpoint.api_key()
    if endpoint.provider_kind is ProviderKind.OPENAI_COMPATIBLE:
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        body = {
            "model": endpoint.model_id,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": endpoint.temperature,
            "max_tokens": endpoint.max_tokens,
        }
        return url, headers, body
    url = endpoint.base_url.rstrip("/") + "/v1/messages"
    headers = {"x-api-key": key, "anthropic-version": "2023-06-01"}
    body = {
        "model": endpoint.model_id,
        "max_tokens": endpoint.max_tokens,
        "temperature": endpoint.temperature,
        "messages": [{"role": "user", "content": user}],
    }
    if system:
        body["system"] = system
    return url, headers, body


def _extract_text(endpoint: ModelEndpoint, data: dict) -> str:
    try:
        if endpoint.provider_kind is ProviderKind.OPENAI_COMPATIBLE:
            text = data["choices"][0]["message"]["content"]
        else:
            text = data["content"][0]["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unexpected provider response shape: {exc!r}") from exc
    if not isinstance(text, str):
        raise MalformedResponse("provider response text is not a string")
    return text


def chat_complete(
    endpoint: ModelEndpoint,
    system: str,
    user: str,
    *,
    client: httpx.Client | None = None,
    recorder: Callable[[ChatExchange], None] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send one chat request; retry transient failures with backoff.

    Every attempt is recorded through ``recorder``. Auth problems are not
    retried; 429/5xx/timeouts are, up to ``endpoint.max_retries`` extra
    attempts.
    """
    if endpoint.provider_kind is ProviderKind.MOCK:
        assert endpoint.responder is not None
        text = endpoint.responder.next(system, user)
        exchange = ChatExchange(
            provider=endpoint.provider_kind.value,
            model_id=endpoint.model_id,
            system=system,
            user=user,
            temperature=endpoint.temperature,
            response_text=text,
            latency_s=0.0,
            attempt_count=1,
        )
        if recorder:
            recorder(exchange)
        return text

    url, headers, body = _build_request(endpoint, system, user)
    own_client = client is None
    http = client or httpx.Client(timeout=endpoint.timeout_s)
    delays = backoff_delays(endpoint.max_retries)
    last_error: Exception | None = None
    try:
        for attempt in range(1, endpoint.max_retries + 2):
            started = time.monotonic()
            error: str | None = None
            try:
                with endpoint._gate:
                    response = http.post(
                        url, headers=headers, json=body, timeout=endpoint.timeout_s
                    )
            except httpx.TimeoutException as exc:
                error = f"timeout: {exc}"
                last_error = exc
            except httpx.HTTPError as exc:
                error = f"transport: {exc}"
                last_error = exc
            else:
                latency = time.monotonic() - started
                if response.status_code in AUTH_STATUS:
                    _record_failure(recorder, endpoint, system, user, latency, attempt,
                                    f"auth status {response.status_code}")
                    raise AuthError(f"provider returned {response.status_code}")
                if response.status_code == 200:
                    try:
                        data = response.json()
                    except ValueError as exc:
                        raise MalformedResponse("response body is not JSON") from exc
                    text = _extract_text(endpoint, data)
                    exchange = ChatExchange(
                        provider=endpoint.provider_kind.value,
                        model_id=endpoint.model_id,
                        system=system,
                        user=user,
                        temperature=endpoint.temperature,
                        response_text=text,
                        latency_s=latency,
                        attempt_count=attempt,
                        token_usage=data.get("usage") if isinstance(data, dict) else None,
                    )
                    if recorder:
                        recorder(exchange)
                    return text
                if response.status_code in RETRYABLE_STATUS:
                    error = f"status {response.status_code}"
                    last_error = GatewayError(error)
                else:
                    _record_failure(recorder, endpoint, system, user, latency, attempt,
                                    f"status {response.status_code}")
                    raise MalformedResponse(
                        f"provider returned unexpected status {response.status_code}"
                    )
            latency = time.monotonic() - started
            _record_failure(recorder, endpoint, system, user, latency, attempt, error or "error")
            if attempt <= endpoint.max_retries:
                sleep(delays[attempt - 1])
        raise RetriesExhausted(
            f"gave up after {endpoint.max_retries + 1} attempts: {last_error}"
        )
    finally:
        if own_client:
            http.close()


def _record_failure(
    recorder: Callable[[ChatExchange], None] | None,
    endpoint: ModelEndpoint,
    system: str,
    user: str,
    latency: float,
    attempt: int,
    error: str,
) -> None:
    if recorder is None:
        return
    recorder(
        ChatExchange(
            provider=endpoint.provider_kind.value,
            model_id=endpoint.model_id,
            system=system,
            user=user,
            temperature=endpoint.temperature,
            response_text="",
            latency_s=latency,
            attempt_count=attempt,
            error=error,
        )
    )
