"""Experiment configuration: JSON parsing, default agent pools, endpoints.

A config file is a single JSON document::

    {
      "pool": [
        {"agent_id": "mixtral", "family": "mixtral", "kind": "llm",
         "endpoint": {"provider_kind": "openai_compatible", "model_id": "...",
                       "base_url": "...", "api_key_env_var": "DEEPINFRA_API_KEY"}},
        {"agent_id": "steady", "family": "alpha", "kind": "mock",
         "behavior": {"binary": "tit_for_tat",
                       "contribution": {"kind": "fixed_contribution", "amount": 10},
                       "punishment": "no_punish"},
         "garbage_trials": [2]}
      ],
      "lesson_endpoint": {...} | "stub",
      "retry_limit": 3,
      "max_workers": 4
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .gateway import ModelEndpoint, ProviderKind
from .runner import AgentPool, AgentSpec, PoolError
from .strategies import ScriptedBehavior, StrategyError, StrategyKind, StrategySpec

DEEPINFRA_BASE_URL = "https://api.deepinfra.com/v1/openai"
ANTHROPIC_BASE_URL = "https://api.anthropic.com"
PLAYER_MODELS = {
    "mixtral": "mistralai/Mixtral-8x22B-Instruct-v0.1",
    "qwen": "Qwen/Qwen2.5-72B-Instruct",
    "llama": "meta-llama/Llama-3.3-70B-Instruct",
    "deepseek": "deepseek-ai/DeepSeek-V3",
}
LESSON_MODEL = "claude-opus-4-1-20250805"


class ConfigError(Exception):
    pass


@dataclass
class HarnessConfig:
    pool: AgentPool
    lesson_endpoint: ModelEndpoint | None  # None = deterministic stub
    retry_limit: int = 3
    max_workers: int | None = None


def _strategy_from_json(value: object, default: StrategySpec) -> StrategySpec:
    if value is None:
        return default
    try:
        if isinstance(value, str):
            return StrategySpec(StrategyKind(value))
        if isinstance(value, dict):
            kind = StrategyKind(value["kind"])
            params = {k: v for k, v in value.items() if k != "kind"}
            return StrategySpec(kind, **params)
    except (KeyError, ValueError, TypeError, StrategyError) as exc:
        raise ConfigError(f"bad strategy {value!r}: {exc}") from exc
    raise ConfigError(f"bad strategy {value!r}")


def behavior_from_json(data: object) -> ScriptedBehavior:
    if data is None:
        return ScriptedBehavior()
    if not isinstance(data, dict):
        raise ConfigError(f"behavior must be an object, got {data!r}")
    defaults = ScriptedBehavior()
    try:
        return ScriptedBehavior(
            binary=_strategy_from_json(data.get("binary"), defaults.binary),
            contribution=_strategy_from_json(data.get("contribution"), defaults.contribution),
            punishment=_strategy_from_json(data.get("punishment"), defaults.punishment),
            word=data.get("word"),
        )
    except StrategyError as exc:
        raise ConfigError(str(exc)) from exc


def endpoint_from_json(data: dict) -> ModelEndpoint:
    if not isinstance(data, dict):
        raise ConfigError(f"endpoint must be an object, got {data!r}")
    try:
        return ModelEndpoint(
            provider_kind=ProviderKind(data["provider_kind"]),
            model_id=data["model_id"],
            base_url=data.get("base_url", ""),
            api_key_env_var=data.get("api_key_env_var", ""),
            temperature=data.get("temperature", 0.7),
            max_tokens=data.get("max_tokens", 2048),
            timeout_s=data.get("timeout_s", 120.0),
            max_retries=data.get("max_retries", 3),
            max_in_flight=data.get("max_in_flight", 4),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad endpoint {data!r}: {exc}") from exc


def agent_from_json(data: dict) -> AgentSpec:
    try:
        kind = data["kind"]
        agent_id = data["agent_id"]
    except KeyError as exc:
        raise ConfigError(f"agent entry missing {exc}") from exc
    family = data.get("family", agent_id)
    behavior = None
    endpoint = None
    if kind == "llm":
        if "endpoint" not in data:
            raise ConfigError(f"agent {agent_id}: llm agents need an endpoint")
        endpoint = endpoint_from_json(data["endpoint"])
    else:
        behavior = behavior_from_json(data.get("behavior"))
    try:
        return AgentSpec(
            agent_id=agent_id,
            family=family,
            kind=kind,
            behavior=behavior,
            endpoint=endpoint,
            garbage_trials=frozenset(data.get("garbage_trials", ())),
        )
    except PoolError as exc:
        raise ConfigError(str(exc)) from exc


def _mock_agent(agent_id: str, family: str, binary: StrategySpec,
                contribution: StrategySpec, punishment: StrategySpec,
                garbage_trials: frozenset[int] = frozenset()) -> AgentSpec:
    return AgentSpec(
        agent_id=agent_id,
        family=family,
        kind="mock",
        behavior=ScriptedBehavior(
            binary=binary, contribution=contribution, punishment=punishment
        ),
        garbage_trials=garbage_trials,
    )


def default_mock_pool() -> AgentPool:
    """Eight deterministic mock agents, two per family, with varied
    dispositions so mock runs produce non-trivial dynamics."""
    fixed = lambda k: StrategySpec(StrategyKind.FIXED_CONTRIBUTION, amount=k)
    match_mean = StrategySpec(StrategyKind.MATCH_MEAN_CONTRIBUTION)
    tft = StrategySpec(StrategyKind.TIT_FOR_TAT)
    allc = StrategySpec(StrategyKind.ALWAYS_COOPERATE)
    alld = StrategySpec(StrategyKind.ALWAYS_DEFECT)
    bern = lambda p: StrategySpec(StrategyKind.RANDOM_BERNOULLI, p=p)
    no_punish = StrategySpec(StrategyKind.NO_PUNISH)
    punish = lambda k: StrategySpec(StrategyKind.PUNISH_BELOW_MEAN, spend=k)
    return AgentPool(
        agents=(
            _mock_agent("alpha_steady", "alpha", tft, fixed(10), no_punish),
            _mock_agent("alpha_bold", "alpha", allc, fixed(15), punish(1)),
            _mock_agent("beta_wary", "beta", alld, fixed(5), no_punish),
            _mock_agent("beta_fair", "beta", tft, match_mean, punish(1)),
            _mock_agent("gamma_open", "gamma", allc, fixed(20), no_punish),
            _mock_agent("gamma_tight", "gamma", alld, fixed(0), no_punish),
            _mock_agent("delta_even", "delta", bern(0.5), fixed(10), no_punish),
            _mock_agent("delta_grim", "delta", StrategySpec(StrategyKind.GRIM_TRIGGER),
                        match_mean, punish(2)),
        )
    )


def default_live_pool() -> AgentPool:
    """The four instruction-tuned player models behind one OpenAI-compatible
    provider; key expected in DEEPINFRA_API_KEY."""
    agents = []
    for family, model_id in PLAYER_MODELS.items():
        agents.append(
            AgentSpec(
                agent_id=family,
                family=family,
                kind="llm",
                endpoint=ModelEndpoint(
                    provider_kind=ProviderKind.OPENAI_COMPATIBLE,
                    model_id=model_id,
                    base_url=DEEPINFRA_BASE_URL,
                    api_key_env_var="DEEPINFRA_API_KEY",
                ),
            )
        )
    return AgentPool(agents=tuple(agents))


def default_lesson_endpoint() -> ModelEndpoint:
    return ModelEndpoint(
        provider_kind=ProviderKind.ANTHROPIC_STYLE,
        model_id=LESSON_MODEL,
        base_url=ANTHROPIC_BASE_URL,
        api_key_env_var="ANTHROPIC_API_KEY",
        max_tokens=1024,
    )


def harness_config_from_json(data: dict | None, mode: str) -> HarnessConfig:
    """Resolve a config document (possibly None) plus the run mode into a
    concrete pool and lesson generator."""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    if "pool" in data:
        entries = data["pool"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("'pool' must be a non-empty list")
        try:
            pool = AgentPool(agents=tuple(agent_from_json(e) for e in entries))
        except PoolError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        pool = default_mock_pool() if mode == "mock" else default_live_pool()
    lesson: ModelEndpoint | None
    lesson_cfg = data.get("lesson_endpoint", "stub" if mode == "mock" else "default")
    if lesson_cfg == "stub":
        lesson = None
    elif lesson_cfg == "default":
        lesson = default_lesson_endpoint()
    else:
        lesson = endpoint_from_json(lesson_cfg)
    retry_limit = data.get("retry_limit", 3)
    if not isinstance(retry_limit, int) or retry_limit < 1:
        raise ConfigError("retry_limit must be a positive integer")
    return HarnessConfig(
        pool=pool,
        lesson_endpoint=lesson,
        retry_limit=retry_limit,
        max_workers=data.get("max_workers"),
    )


def load_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    return data
