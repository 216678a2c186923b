"""Deterministic scripted agents for offline runs and oracle tests."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .games import (
    Action,
    BinaryAction,
    Broadcast,
    Choice,
    Contribution,
    GameSpec,
    Phase,
    PunishmentAllocation,
    RoundRecord,
)
from .prompts import Observation


class StrategyError(Exception):
    pass


class StrategyKind(str, Enum):
    ALWAYS_COOPERATE = "always_cooperate"
    ALWAYS_DEFECT = "always_defect"
    TIT_FOR_TAT = "tit_for_tat"
    GRIM_TRIGGER = "grim_trigger"
    RANDOM_BERNOULLI = "random_bernoulli"
    FIXED_CONTRIBUTION = "fixed_contribution"
    MATCH_MEAN_CONTRIBUTION = "match_mean_contribution"
    NO_PUNISH = "no_punish"
    PUNISH_BELOW_MEAN = "punish_below_mean"


BINARY_STRATEGIES = frozenset(
    {
        StrategyKind.ALWAYS_COOPERATE,
        StrategyKind.ALWAYS_DEFECT,
        StrategyKind.TIT_FOR_TAT,
        StrategyKind.GRIM_TRIGGER,
        StrategyKind.RANDOM_BERNOULLI,
    }
)
CONTRIBUTION_STRATEGIES = frozenset(
    {StrategyKind.FIXED_CONTRIBUTION, StrategyKind.MATCH_MEAN_CONTRIBUTION}
)
PUNISH_STRATEGIES = frozenset({StrategyKind.NO_PUNISH, StrategyKind.PUNISH_BELOW_MEAN})


@dataclass(frozen=True)
class StrategySpec:
    kind: StrategyKind
    p: float = 0.5  # RANDOM_BERNOULLI cooperation probability
    amount: int = 10  # FIXED_CONTRIBUTION tokens
    spend: int = 1  # PUNISH_BELOW_MEAN tokens per target

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise StrategyError("p must be in [0, 1]")
        if self.amount < 0:
            raise StrategyError("amount must be non-negative")
        if self.spend < 0:
            raise StrategyError("spend must be non-negative")


def _cooperative_choice(spec: GameSpec, cooperate: bool) -> BinaryAction:
    family = spec.choice_family
    if family is None:
        raise StrategyError(f"{spec.game_kind.value} has no binary choice")
    return BinaryAction(family[0] if cooperate else family[1])


def _last_round_choices(history: tuple[RoundRecord, ...]) -> tuple[Choice, ...] | None:
    if not history:
        return None
    actions = history[-1].actions_for(Phase.ACT)
    if actions is None:
        return None
    return tuple(a.value for a in actions)  # type: ignore[union-attr]


def _others_cooperated_last_round(obs: Observation) -> tuple[int, int] | None:
    """(cooperators, others) among co-players in the previous round."""
    choices = _last_round_choices(obs.history)
    if choices is None:
        return None
    others = [c for i, c in enumerate(choices) if i + 1 != obs.player_id]
    return sum(1 for c in others if c.is_cooperative), len(others)


def _any_defection(history: tuple[RoundRecord, ...]) -> bool:
    for record in history:
        actions = record.actions_for(Phase.ACT)
        if actions is None:
            continue
        if any(not a.value.is_cooperative for a in actions):  # type: ignore[union-attr]
            return True
    return False


def scripted_decide(strategy: StrategySpec, obs: Observation, rng: random.Random) -> Action:
    """Resolve one strategy for one observation; raises on phase mismatch.

    Tit-for-tat cooperates first, then copies the opponent (2-player) or
    cooperates iff a majority of co-players cooperated last round.
    Grim trigger defects forever once any defection appears in history.
    """
    kind = strategy.kind
    phase = obs.phase
    if phase is Phase.ACT and kind in BINARY_STRATEGIES:
        if kind is StrategyKind.ALWAYS_COOPERATE:
            return _cooperative_choice(obs.spec, True)
        if kind is StrategyKind.ALWAYS_DEFECT:
            return _cooperative_choice(obs.spec, False)
        if kind is StrategyKind.RANDOM_BERNOULLI:
            return _cooperative_choice(obs.spec, rng.random() < strategy.p)
        if kind is StrategyKind.GRIM_TRIGGER:
            return _cooperative_choice(obs.spec, not _any_defection(obs.history))
        counts = _others_cooperated_last_round(obs)
        if counts is None:
            return _cooperative_choice(obs.spec, True)
        cooperators, others = counts
        return _cooperative_choice(obs.spec, cooperators * 2 >= others)
    if phase is Phase.CONTRIBUTE and kind in CONTRIBUTION_STRATEGIES:
        endowment = obs.spec.endowment
        if kind is StrategyKind.FIXED_CONTRIBUTION:
            return Contribution(min(strategy.amount, endowment))
        last = obs.history[-1].contributions if obs.history else None
        if last is None:
            return Contribution(endowment // 2)
        mean = sum(last) / len(last)
        return Contribution(min(int(mean + 0.5), endowment))
    if phase is Phase.PUNISH and kind in PUNISH_STRATEGIES:
        if kind is StrategyKind.NO_PUNISH or not obs.current_contributions:
            return PunishmentAllocation()
        contribs = obs.current_contributions
        mean = sum(contribs) / len(contribs)
        spends = {
            i + 1: strategy.spend
            for i, c in enumerate(contribs)
            if c < mean and i + 1 != obs.player_id and strategy.spend > 0
        }
        return PunishmentAllocation.from_mapping(spends)
    raise StrategyError(f"strategy {kind.value} cannot play phase {phase.value}")


@dataclass(frozen=True)
class ScriptedBehavior:
    """Per-phase strategy bundle for one scripted agent.

    The communicate phase broadcasts either a fixed word or, by default,
    an echo of the action the binary strategy is about to take.
    """

    binary: StrategySpec = StrategySpec(StrategyKind.TIT_FOR_TAT)
    contribution: StrategySpec = StrategySpec(StrategyKind.FIXED_CONTRIBUTION, amount=10)
    punishment: StrategySpec = StrategySpec(StrategyKind.NO_PUNISH)
    word: str | None = None  # None = echo intended action

    def __post_init__(self) -> None:
        if self.binary.kind not in BINARY_STRATEGIES:
            raise StrategyError(f"{self.binary.kind.value} is not a binary strategy")
        if self.contribution.kind not in CONTRIBUTION_STRATEGIES:
            raise StrategyError(f"{self.contribution.kind.value} is not a contribution strategy")
        if self.punishment.kind not in PUNISH_STRATEGIES:
            raise StrategyError(f"{self.punishment.kind.value} is not a punish strategy")


_ECHO_WORDS = {Choice.HUNT_STAG: "stag", Choice.HUNT_HARE: "hare",
               Choice.COOPERATE: "cooperate", Choice.DEFECT: "defect"}


def behavior_decide(behavior: ScriptedBehavior, obs: Observation, rng: random.Random) -> Action:
    """Route an observation to the matching strategy of the bundle."""
    if obs.phase is Phase.ACT:
        return scripted_decide(behavior.binary, obs, rng)
    if obs.phase is Phase.CONTRIBUTE:
        return scripted_decide(behavior.contribution, obs, rng)
    if obs.phase is Phase.PUNISH:
        return scripted_decide(behavior.punishment, obs, rng)
    if behavior.word is not None:
        return Broadcast(behavior.word)
    intent = scripted_decide(
        behavior.binary,
        Observation(
            player_id=obs.player_id,
            spec=obs.spec,
            round_index=obs.round_index,
            phase=Phase.ACT,
            history=obs.history,
            history_text=obs.history_text,
        ),
        rng,
    )
    return Broadcast(_ECHO_WORDS[intent.value])  # type: ignore[union-attr]
