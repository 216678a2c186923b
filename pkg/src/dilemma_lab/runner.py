"""Runs games, trials, and experiment batches.

Within a trial stages are strictly sequential (lessons chain them); trials
run in parallel workers. All randomness flows from per-trial seeds derived
by hashing, so a (master seed, config) pair fully determines every mock
log, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .actions import ActionParseError, action_to_json, parse_response
from .curriculum import (
    ConditionName,
    Lesson,
    StageSpec,
    accumulate,
    build_condition,
    build_lesson_context,
    generate_lesson,
)
from .games import (
    GameKind,
    GameLog,
    GameSpec,
    Phase,
    abort_game,
    is_terminal,
    new_game,
    step,
    to_log,
)
from .gateway import ChatExchange, GatewayError, ModelEndpoint, chat_complete
from .metrics import stage_metrics
from .prompts import Observation, make_observation, render_prompt, template_for
from .strategies import ScriptedBehavior, behavior_decide
from .events import TrialSink, round_event_fields, spec_to_json

SYSTEM_PROMPT = (
    "You are an autonomous agent playing an economic game. Reason carefully, "
    "then answer with a single JSON object in the exact format the "
    "instructions specify."
)
RETRY_REMINDER = (
    "\n\nREMINDER: Your previous reply could not be parsed. Respond with "
    "ONLY a single valid JSON object in the exact format specified above."
)
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


class PoolError(Exception):
    pass


class GameAborted(Exception):
    """A seat exhausted its retries (or its transport); the game stops."""

    def __init__(self, log: GameLog, agent_id: str, round_index: int, phase: Phase, cause: str):
        super().__init__(f"{agent_id} aborted round {round_index} ({phase.value}): {cause}")
        self.log = log
        self.agent_id = agent_id
        self.round_index = round_index
        self.phase = phase
        self.cause = cause


def derive_seed(*parts: object) -> int:
    """Stable child seed from hashed parts (documented replay scheme)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Agent pool and seats
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSpec:
    """One pool member: a scripted bot, a text-level mock, or a live model."""

    agent_id: str
    family: str
    kind: str  # "scripted" | "mock" | "llm"
    behavior: ScriptedBehavior | None = None
    endpoint: ModelEndpoint | None = None
    garbage_trials: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "mock", "llm"):
            raise PoolError(f"unknown agent kind {self.kind!r}")
        if self.kind == "llm" and self.endpoint is None:
            raise PoolError(f"agent {self.agent_id}: llm agents need an endpoint")
        if self.kind in ("scripted", "mock") and self.behavior is None:
            raise PoolError(f"agent {self.agent_id}: {self.kind} agents need a behavior")


@dataclass(frozen=True)
class AgentPool:
    agents: tuple[AgentSpec, ...]

    def __post_init__(self) -> None:
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise PoolError("agent ids must be unique")

    def by_id(self, agent_id: str) -> AgentSpec:
        for agent in self.agents:
            if agent.agent_id == agent_id:
                return agent
        raise PoolError(f"no agent {agent_id!r} in pool")

    @property
    def families(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for agent in self.agents:
            out.setdefault(agent.family, []).append(agent.agent_id)
        return out


class ScriptedSeat:
    """Direct action decisions, no prompt round-trip."""

    scripted = True

    def __init__(self, agent_id: str, behavior: ScriptedBehavior, rng: random.Random):
        self.agent_id = agent_id
        self.behavior = behavior
        self.rng = rng

    def decide(self, obs: Observation):
        return behavior_decide(self.behavior, obs, self.rng)


class ChatSeat:
    """A live model behind the gateway."""

    scripted = False

    def __init__(self, agent_id: str, endpoint: ModelEndpoint, client: httpx.Client | None = None):
        self.agent_id = agent_id
        self.endpoint = endpoint
        self.client = client

    def respond(self, obs: Observation, system: str, user: str) -> tuple[str, ChatExchange]:
        exchanges: list[ChatExchange] = []
        text = chat_complete(
            self.endpoint, system, user, client=self.client, recorder=exchanges.append
        )
        return text, exchanges[-1]


class MockTextSeat:
    """Deterministic text-level agent: decides via a scripted behavior and
    emits the JSON an LLM would, exercising the full parse pipeline."""

    scripted = False

    def __init__(
        self, agent_id: str, behavior: ScriptedBehavior, rng: random.Random, garbage: bool = False
    ):
        self.agent_id = agent_id
        self.behavior = behavior
        self.rng = rng
        self.garbage = garbage

    def respond(self, obs: Observation, system: str, user: str) -> tuple[str, ChatExchange]:
        if self.garbage:
            text = "I would rather describe my move in prose than fill in your form."
        else:
            action = behavior_decide(self.behavior, obs, self.rng)
            payload = {
                "reasoning": f"Scripted play for round {obs.round_index}.",
                "action": action_to_json(action),
            }
            text = "Taking my turn.\n```json\n" + json.dumps(payload) + "\n```"
        exchange = ChatExchange(
            provider="mock",
            model_id=f"mock:{self.agent_id}",
            system=system,
            user=user,
            temperature=0.0,
            response_text=text,
            latency_s=0.0,
            attempt_count=1,
        )
        return text, exchange


Seat = ScriptedSeat | ChatSeat | MockTextSeat


def build_seat(
    spec: AgentSpec,
    trial_index: int,
    stage_seed: int,
    client: httpx.Client | None = None,
) -> Seat:
    rng = random.Random(derive_seed(stage_seed, spec.agent_id))
    if spec.kind == "scripted":
        assert spec.behavior is not None
        return ScriptedSeat(spec.agent_id, spec.behavior, rng)
    if spec.kind == "mock":
        assert spec.behavior is not None
        return MockTextSeat(
            spec.agent_id, spec.behavior, rng, garbage=trial_index in spec.garbage_trials
        )
    assert spec.endpoint is not None
    return ChatSeat(spec.agent_id, spec.endpoint, client)


# ---------------------------------------------------------------------------
# Role assignment
# ---------------------------------------------------------------------------


def assign_roles(pool: AgentPool, n_players: int, rng: random.Random) -> dict[int, str]:
    """Uniform selection without replacement, permuted into player roles."""
    ids = [a.agent_id for a in pool.agents]
    if len(ids) < n_players:
        raise PoolError(f"pool of {len(ids)} cannot seat {n_players} players")
    chosen = rng.sample(ids, n_players)
    return {i + 1: agent_id for i, agent_id in enumerate(chosen)}


def ensure_can_seat(pool: AgentPool, n_players: int, grouping: str = "uniform") -> None:
    """Raise PoolError if the pool can never satisfy the grouping; checked
    up front so a batch does not burn trials on an impossible config."""
    if grouping == "uniform":
        if len(pool.agents) < n_players:
            raise PoolError(f"pool of {len(pool.agents)} cannot seat {n_players} players")
        return
    families = pool.families
    if grouping == "hetero":
        if len(families) < n_players:
            raise PoolError(
                f"heterogeneous grouping needs {n_players} families, pool has {len(families)}"
            )
        return
    if grouping == "coalition":
        eligible = [fam for fam, ids in families.items() if len(ids) >= 2]
        if len(eligible) < 2:
            raise PoolError("coalition grouping needs at least 2 families with 2+ agents")
        return
    raise PoolError(f"unknown grouping {grouping!r}")


def assign_roles_grouped(
    pool: AgentPool, n_players: int, rng: random.Random, grouping: str
) -> dict[int, str]:
    """uniform: any agents; hetero: pairwise-distinct families;
    coalition: two agents from each of two families."""
    if grouping == "uniform":
        return assign_roles(pool, n_players, rng)
    families = {fam: sorted(ids) for fam, ids in sorted(pool.families.items())}
    if grouping == "hetero":
        if len(families) < n_players:
            raise PoolError(
                f"heterogeneous grouping needs {n_players} families, pool has {len(families)}"
            )
        chosen_families = rng.sample(sorted(families), n_players)
        chosen = [rng.choice(families[fam]) for fam in chosen_families]
    elif grouping == "coalition":
        eligible = [fam for fam, ids in families.items() if len(ids) >= 2]
        if len(eligible) < 2:
            raise PoolError("coalition grouping needs at least 2 families with 2+ agents")
        chosen_families = rng.sample(sorted(eligible), 2)
        chosen = []
        for fam in chosen_families:
            chosen.extend(rng.sample(families[fam], 2))
    else:
        raise PoolError(f"unknown grouping {grouping!r}")
    rng.shuffle(chosen)
    return {i + 1: agent_id for i, agent_id in enumerate(chosen)}


# ---------------------------------------------------------------------------
# Game loop
# ---------------------------------------------------------------------------


def _observe(state, seats: Sequence[Seat], lessons: Sequence[Lesson], player_id: int) -> Observation:
    spec = state.spec
    phase = state.phase
    current_words = None
    current_contribs = None
    for pa in state.pending:
        if pa.phase is Phase.COMMUNICATE:
            current_words = tuple(a.word for a in pa.actions)
        elif pa.phase is Phase.CONTRIBUTE:
            current_contribs = tuple(a.amount for a in pa.actions)
    opponent = None
    if spec.game_kind is GameKind.IPD2:
        opponent = seats[2 - player_id].agent_id  # the other of two seats
    return make_observation(
        spec,
        state.round_index,
        phase,
        state.records,
        player_id,
        lessons=tuple(l.text for l in lessons),
        current_words=current_words,
        current_contributions=current_contribs,
        opponent_name=opponent,
    )


def _query_seat(
    seat: Seat,
    obs: Observation,
    sink: TrialSink,
    stage_index: int,
    retry_limit: int,
):
    """One player's action for one phase, with the parse-retry policy."""
    if isinstance(seat, ScriptedSeat):
        return seat.decide(obs)
    template = template_for(obs.spec, obs.phase)
    base_user = render_prompt(template, obs)
    cause = "unknown"
    for attempt in range(1, retry_limit + 1):
        user = base_user if attempt == 1 else base_user + RETRY_REMINDER
        sink.emit(
            "prompt",
            stage_index=stage_index,
            round=obs.round_index,
            phase=obs.phase.value,
            player=obs.player_id,
            agent_id=seat.agent_id,
            attempt=attempt,
            system=SYSTEM_PROMPT,
            user=user,
        )
        try:
            text, exchange = seat.respond(obs, SYSTEM_PROMPT, user)
        except GatewayError as exc:
            raise GameAborted(
                GameLog(obs.spec, (), ()),  # replaced by caller with real state
                seat.agent_id,
                obs.round_index,
                obs.phase,
                f"gateway:{exc.kind}: {exc}",
            ) from exc
        sink.emit(
            "exchange",
            stage_index=stage_index,
            round=obs.round_index,
            phase=obs.phase.value,
            player=obs.player_id,
            agent_id=seat.agent_id,
            provider=exchange.provider,
            model_id=exchange.model_id,
            attempt_count=exchange.attempt_count,
            response_text=exchange.response_text,
            latency_s=exchange.latency_s,
            token_usage=exchange.token_usage,
        )
        try:
            return parse_response(text, obs.phase, obs.spec, obs.player_id).action
        except ActionParseError as exc:
            cause = f"parse:{exc.kind}: {exc}"
    raise GameAborted(
        GameLog(obs.spec, (), ()),
        seat.agent_id,
        obs.round_index,
        obs.phase,
        f"retries exhausted after {retry_limit} attempts; last error {cause}",
    )


def run_game(
    spec: GameSpec,
    seats: Sequence[Seat],
    lessons: Sequence[Lesson],
    sink: TrialSink,
    stage_index: int,
    retry_limit: int = 3,
) -> GameLog:
    """Play one game to completion; raises GameAborted with the partial log.

    All seats of a phase observe the same pre-phase state, so simultaneous
    actions never leak within a round. Queries run in seat order, which
    keeps shared-rng scripted agents deterministic.
    """
    if len(seats) != spec.n_players:
        raise PoolError(f"{spec.n_players} seats required, got {len(seats)}")
    state = new_game(spec)
    while not is_terminal(state):
        actions = []
        for player_id in range(1, spec.n_players + 1):
            obs = _observe(state, seats, lessons, player_id)
            try:
                actions.append(
                    _query_seat(seats[player_id - 1], obs, sink, stage_index, retry_limit)
                )
            except GameAborted as exc:
                aborted = abort_game(state, exc.cause)
                raise GameAborted(
                    to_log(aborted), exc.agent_id, exc.round_index, exc.phase, exc.cause
                ) from None
        state, record = step(state, actions)
        if record is not None:
            sink.emit("round", stage_index=stage_index,
                      **round_event_fields(spec, record, state.totals_tenths))
    return to_log(state)


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    trial_id: str
    condition: str
    trial_index: int
    seed: int
    role_assignment: dict[int, str]
    stage_logs: list[GameLog]
    lessons: list[Lesson]
    status: str  # "completed" | "aborted"
    abort: dict | None = None
    final_metrics: dict | None = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"


@dataclass(frozen=True)
class TrialPlan:
    """What one trial of a condition looks like."""

    condition: str
    stages: Callable[[int], tuple[StageSpec, ...]]  # trial seed -> stage list
    grouping: str = "uniform"
    n_roles: int = 4


def curriculum_plan(name: ConditionName | str, precursor_rounds: int = 3) -> TrialPlan:
    name = ConditionName(name)

    def stages(trial_seed: int) -> tuple[StageSpec, ...]:
        scramble = (
            derive_seed(trial_seed, "scramble") if name is ConditionName.SCRAMBLED else None
        )
        return build_condition(name, scramble_seed=scramble,
                               precursor_rounds=precursor_rounds).stages

    return TrialPlan(condition=name.value, stages=stages)


def pilot_plan(comm: bool, grouping: str, rounds: int = 3) -> TrialPlan:
    kind = GameKind.STAG_HUNT_COMM if comm else GameKind.STAG_HUNT
    label = f"pilot_{grouping}_{'comm' if comm else 'nocomm'}"

    def stages(trial_seed: int) -> tuple[StageSpec, ...]:
        return (StageSpec(stage_index=1, spec=GameSpec(game_kind=kind, rounds=rounds)),)

    return TrialPlan(condition=label, stages=stages, grouping=grouping)


def _final_metrics(log: GameLog) -> dict:
    m = stage_metrics(log)
    return {
        "cooperation_rate": m.cooperation_rate,
        "avg_payoff": m.avg_payoff,
        "per_round_cooperation": list(m.trajectory),
    }


def run_trial(
    plan: TrialPlan,
    pool: AgentPool,
    trial_index: int,
    trial_seed: int,
    *,
    lesson_generator: ModelEndpoint | None = None,
    retry_limit: int = 3,
    mode: str = "mock",
    client: httpx.Client | None = None,
) -> tuple[TrialResult, TrialSink]:
    """One full trial: roles, stages in order, lessons in between.

    Curriculum stages are validated not to need lessons from a trial that
    failed earlier: an abort ends the trial with partial data preserved.
    """
    trial_id = f"{plan.condition}_{trial_index:03d}"
    stages = plan.stages(trial_seed)
    roles = assign_roles_grouped(
        pool, plan.n_roles, random.Random(derive_seed(trial_seed, "roles")), plan.grouping
    )
    now = FIXED_TIMESTAMP if mode == "mock" else (
        datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    )
    sink = TrialSink()
    sink.emit(
        "trial_start",
        trial_id=trial_id,
        condition=plan.condition,
        trial_index=trial_index,
        seed=trial_seed,
        role_assignment={str(k): v for k, v in roles.items()},
        stage_count=len(stages),
    )
    stage_logs: list[GameLog] = []
    lessons: list[Lesson] = []
    result = TrialResult(
        trial_id=trial_id,
        condition=plan.condition,
        trial_index=trial_index,
        seed=trial_seed,
        role_assignment=roles,
        stage_logs=stage_logs,
        lessons=lessons,
        status="completed",
    )
    for stage in stages:
        spec = stage.spec
        stage_seed = derive_seed(trial_seed, "stage", stage.stage_index)
        seats = [
            build_seat(pool.by_id(roles[p]), trial_index, stage_seed, client)
            for p in range(1, spec.n_players + 1)
        ]
        sink.emit("stage_start", stage_index=stage.stage_index, spec=spec_to_json(spec))
        try:
            log = run_game(spec, seats, lessons, sink, stage.stage_index, retry_limit)
        except GameAborted as exc:
            stage_logs.append(exc.log)
            sink.emit(
                "stage_end",
                stage_index=stage.stage_index,
                status="aborted",
                rounds_played=len(exc.log.rounds),
                totals_tenths=list(exc.log.totals_tenths),
            )
            result.status = "aborted"
            result.abort = {
                "stage_index": stage.stage_index,
                "round": exc.round_index,
                "phase": exc.phase.value,
                "agent_id": exc.agent_id,
                "reason": exc.cause,
            }
            break
        stage_logs.append(log)
        sink.emit(
            "stage_end",
            stage_index=stage.stage_index,
            status="completed",
            rounds_played=len(log.rounds),
            totals_tenths=list(log.totals_tenths),
        )
        if stage.stage_index < len(stages):
            ctx = build_lesson_context(log, stage.stage_index, stage_metrics(log), lessons)
            exchanges: list[ChatExchange] = []
            lesson = generate_lesson(
                ctx, lesson_generator, generated_at=now,
                recorder=exchanges.append, client=client,
            )
            for exchange in exchanges:
                sink.emit(
                    "exchange",
                    stage_index=stage.stage_index,
                    round=None,
                    phase="lesson",
                    player=None,
                    agent_id="lesson_generator",
                    provider=exchange.provider,
                    model_id=exchange.model_id,
                    attempt_count=exchange.attempt_count,
                    response_text=exchange.response_text,
                    latency_s=exchange.latency_s,
                    token_usage=exchange.token_usage,
                )
            lessons[:] = accumulate(lessons, lesson)
            sink.emit(
                "lesson",
                stage_index=stage.stage_index,
                game_name=lesson.game_name,
                text=lesson.text,
                generator_id=lesson.generator_id,
                generated_at=lesson.generated_at,
            )
    if result.completed:
        result.final_metrics = _final_metrics(stage_logs[-1])
    sink.emit(
        "trial_end",
        trial_id=trial_id,
        status=result.status,
        abort=result.abort,
        final_totals_tenths=(
            list(stage_logs[-1].totals_tenths) if result.completed else None
        ),
        final_metrics=result.final_metrics,
    )
    return result, sink


# ---------------------------------------------------------------------------
# Experiment batches
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    plans: list[TrialPlan]
    pool: AgentPool
    out_dir: Path
    trials: int = 30
    master_seed: int = 0
    lesson_generator: ModelEndpoint | None = None
    retry_limit: int = 3
    max_workers: int | None = None
    mode: str = "mock"


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every (condition, trial) pair; one JSONL file per trial plus a
    batch summary. Individual trial failures never halt the batch."""
    out_dir = Path(config.out_dir)
    trials_dir = out_dir / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)
    client = httpx.Client() if config.mode == "live" else None

    def one(plan: TrialPlan, index: int) -> tuple[str, str, str | None, str]:
        seed = derive_seed(config.master_seed, plan.condition, index)
        result, sink = run_trial(
            plan,
            config.pool,
            index,
            seed,
            lesson_generator=config.lesson_generator,
            retry_limit=config.retry_limit,
            mode=config.mode,
            client=client,
        )
        path = trials_dir / f"{result.trial_id}.jsonl"
        sink.write(path)
        return plan.condition, result.status, None, str(path.relative_to(out_dir))

    tasks = [(plan, index) for plan in config.plans for index in range(config.trials)]
    outcomes: list[tuple[str, str, str | None, str]] = []
    errors: list[dict] = []
    max_workers = config.max_workers or min(8, len(tasks)) or 1
    try:
        with ThreadPoolExecutor(max_workers=max_workers) as pool_exec:
            futures = {pool_exec.submit(one, plan, index): (plan, index) for plan, index in tasks}
            for future, (plan, index) in futures.items():
                try:
                    outcomes.append(future.result())
                except Exception as exc:  # noqa: BLE001 - batch must survive trial crashes
                    errors.append(
                        {"condition": plan.condition, "trial_index": index, "error": str(exc)}
                    )
    finally:
        if client is not None:
            client.close()

    conditions: dict[str, dict] = {}
    for plan in config.plans:
        rows = [o for o in outcomes if o[0] == plan.condition]
        conditions[plan.condition] = {
            "requested": config.trials,
            "completed": sum(1 for o in rows if o[1] == "completed"),
            "aborted": sum(1 for o in rows if o[1] == "aborted"),
            "trial_files": sorted(o[3] for o in rows),
        }
    summary = {
        "master_seed": config.master_seed,
        "trials_per_condition": config.trials,
        "mode": config.mode,
        "conditions": conditions,
        "errors": sorted(errors, key=lambda e: (e["condition"], e["trial_index"])),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary
