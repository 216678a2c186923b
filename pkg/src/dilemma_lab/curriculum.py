"""Curriculum conditions, stage chaining, and inter-stage lessons.

Every condition ends in the 10-round punishment game. After each earlier
stage a strategic lesson is produced from the finished log — by a live
generator model or by a deterministic stub — and accumulated in order for
all later prompts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import httpx

from .games import (
    GameKind,
    GameLog,
    GameSpec,
    Phase,
    PunishmentAllocation,
)
from .gateway import ChatExchange, ModelEndpoint, chat_complete
from .metrics import StageMetrics
from .prompts import load_template, render_template

TARGET_ROUNDS = 10
PRECURSOR_ROUNDS = 3

GAME_TITLES = {
    GameKind.STAG_HUNT: "StagHunt",
    GameKind.STAG_HUNT_COMM: "StagHuntWithCommunication",
    GameKind.IPD2: "IteratedPrisonersDilemma",
    GameKind.NIPD: "NPlayerIteratedPrisonersDilemma",
    GameKind.PGG: "PublicGoodsGame",
    GameKind.IPGG_PUNISH: "IteratedPublicGoodsGameWithPunishment",
}


class CurriculumError(Exception):
    pass


class ConditionName(str, Enum):
    FULL_CURRICULUM = "full_curriculum"
    SCRAMBLED = "scrambled"
    DIRECT_PRECURSOR = "direct_precursor"
    CONTROL = "control"


@dataclass(frozen=True)
class StageSpec:
    stage_index: int  # 1-based
    spec: GameSpec


@dataclass(frozen=True)
class CurriculumCondition:
    name: ConditionName
    stages: tuple[StageSpec, ...]
    scramble_seed: int | None = None

    def __post_init__(self) -> None:
        final = self.stages[-1].spec
        if final.game_kind is not GameKind.IPGG_PUNISH or final.rounds != TARGET_ROUNDS:
            raise CurriculumError("every condition must end in the 10-round punishment game")


def _precursors(rounds: int) -> list[GameSpec]:
    return [
        GameSpec(game_kind=GameKind.IPD2, rounds=rounds, n_players=2),
        GameSpec(game_kind=GameKind.NIPD, rounds=rounds),
        GameSpec(game_kind=GameKind.PGG, rounds=rounds),
    ]


def build_condition(
    name: ConditionName | str,
    scramble_seed: int | None = None,
    precursor_rounds: int = PRECURSOR_ROUNDS,
) -> CurriculumCondition:
    """Assemble a condition's ordered stage list.

    Scrambled draws a uniform random order of the three precursor games
    from ``scramble_seed``; the target task always stays last.
    """
    name = ConditionName(name)
    target = GameSpec(game_kind=GameKind.IPGG_PUNISH, rounds=TARGET_ROUNDS)
    if name is ConditionName.FULL_CURRICULUM:
        specs = _precursors(precursor_rounds) + [target]
    elif name is ConditionName.DIRECT_PRECURSOR:
        specs = [GameSpec(game_kind=GameKind.PGG, rounds=precursor_rounds), target]
    elif name is ConditionName.CONTROL:
        specs = [target]
    else:
        if scramble_seed is None:
            raise CurriculumError("scrambled condition requires a scramble seed")
        first_three = _precursors(precursor_rounds)
        random.Random(scramble_seed).shuffle(first_three)
        specs = first_three + [target]
    stages = tuple(StageSpec(stage_index=i + 1, spec=s) for i, s in enumerate(specs))
    return CurriculumCondition(name=name, stages=stages, scramble_seed=scramble_seed)


# ---------------------------------------------------------------------------
# Lessons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lesson:
    stage_index: int
    game_name: str
    text: str
    generator_id: str
    generated_at: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise CurriculumError("lesson text must be non-empty")


@dataclass(frozen=True)
class LessonPromptContext:
    game_name: str
    stage_num: int
    rounds_played: int
    num_players: int
    cooperation_rate: float  # percent
    avg_payoff: float  # tokens
    cooperation_trajectory: tuple[float, ...]  # percent per round
    patterns: str
    previous_lessons: tuple[str, ...]


def _pattern_lines(log: GameLog) -> str:
    """Deterministic behavioral summary for the lesson prompt."""
    spec = log.spec
    lines: list[str] = []
    if spec.game_kind in (GameKind.PGG, GameKind.IPGG_PUNISH):
        for i in range(spec.n_players):
            values = [r.contributions[i] for r in log.rounds]  # type: ignore[index]
            mean = sum(values) / len(values)
            lines.append(
                f"Player {i + 1} mean contribution: {mean:.1f} of {spec.endowment}"
            )
    else:
        first_defection: int | None = None
        for i in range(spec.n_players):
            coop = 0
            for r in log.rounds:
                actions = r.actions_for(Phase.ACT)
                assert actions is not None
                if actions[i].value.is_cooperative:  # type: ignore[union-attr]
                    coop += 1
                elif first_defection is None or r.round_index < first_defection:
                    first_defection = r.round_index
            lines.append(f"Player {i + 1} cooperated in {coop} of {len(log.rounds)} rounds")
        lines.append(
            "No defections observed"
            if first_defection is None
            else f"First defection in round {first_defection}"
        )
    if spec.game_kind is GameKind.IPGG_PUNISH:
        spent = [0] * spec.n_players
        received = [0] * spec.n_players
        for r in log.rounds:
            allocations = r.actions_for(Phase.PUNISH)
            assert allocations is not None
            for i, alloc in enumerate(allocations):
                assert isinstance(alloc, PunishmentAllocation)
                spent[i] += alloc.total
                for target, spend in alloc.spends:
                    received[target - 1] += spend
        if sum(spent) == 0:
            lines.append("No punishment was used")
        else:
            for i in range(spec.n_players):
                lines.append(
                    f"Player {i + 1} spent {spent[i]} tokens punishing and received "
                    f"{received[i]} tokens of punishment"
                )
    return "\n".join(lines)


def build_lesson_context(
    log: GameLog,
    stage_index: int,
    metrics: StageMetrics,
    previous: Sequence[Lesson],
) -> LessonPromptContext:
    if not log.completed:
        raise CurriculumError("cannot build a lesson context from an aborted log")
    return LessonPromptContext(
        game_name=GAME_TITLES[log.spec.game_kind],
        stage_num=stage_index,
        rounds_played=len(log.rounds),
        num_players=log.spec.n_players,
        cooperation_rate=100.0 * metrics.cooperation_rate,
        avg_payoff=metrics.avg_payoff,
        cooperation_trajectory=tuple(100.0 * v for v in metrics.trajectory),
        patterns=_pattern_lines(log),
        previous_lessons=tuple(l.text for l in previous),
    )


def _trajectory_text(values: Sequence[float]) -> str:
    return "[" + ", ".join(f"{v:.1f}" for v in values) + "]"


def previous_lessons_text(texts: Sequence[str]) -> str:
    if not texts:
        return "None."
    return "\n".join(f"{i + 1}. {text}" for i, text in enumerate(texts))


def lesson_prompt(ctx: LessonPromptContext) -> str:
    template = load_template("lesson")
    return render_template(
        template.body,
        {
            "game_name": ctx.game_name,
            "stage_num": ctx.stage_num,
            "rounds_played": ctx.rounds_played,
            "num_players": ctx.num_players,
            "cooperation_rate": ctx.cooperation_rate,
            "avg_payoff": ctx.avg_payoff,
            "cooperation_trajectory": _trajectory_text(ctx.cooperation_trajectory),
            "patterns": ctx.patterns,
            "previous_lessons_string": previous_lessons_text(ctx.previous_lessons),
        },
    )


def stub_lesson_text(ctx: LessonPromptContext) -> str:
    return (
        f"Lesson from {ctx.game_name}: cooperation rate was {ctx.cooperation_rate:.1f}%, "
        f"payoffs averaged {ctx.avg_payoff:.1f} tokens over {ctx.rounds_played} rounds; "
        f"per-round cooperation was {_trajectory_text(ctx.cooperation_trajectory)}."
    )


def generate_lesson(
    ctx: LessonPromptContext,
    generator: ModelEndpoint | None = None,
    *,
    generated_at: str = "",
    recorder: Callable[[ChatExchange], None] | None = None,
    client: httpx.Client | None = None,
) -> Lesson:
    """Produce the stage lesson: live model reply verbatim, or the stub."""
    if generator is None:
        return Lesson(
            stage_index=ctx.stage_num,
            game_name=ctx.game_name,
            text=stub_lesson_text(ctx),
            generator_id="stub",
            generated_at=generated_at,
        )
    reply = chat_complete(generator, "", lesson_prompt(ctx), recorder=recorder, client=client)
    if not reply.strip():
        raise CurriculumError("lesson generator returned an empty reply")
    return Lesson(
        stage_index=ctx.stage_num,
        game_name=ctx.game_name,
        text=reply,
        generator_id=generator.model_id,
        generated_at=generated_at,
    )


def accumulate(lessons: Sequence[Lesson], new: Lesson) -> list[Lesson]:
    """Append-only, order-preserving lesson accumulation."""
    return [*lessons, new]
