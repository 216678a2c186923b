"""Deterministic state machines and payoff arithmetic for the five games.

Pure module: no I/O, no agents, no randomness. All payoffs are carried as
integer tenths of a token (fixed point) so that logs and oracle tests are
bit-exact; use :func:`tokens` to convert for display.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence, Union

TENTHS = 10  # fixed-point scale: payoff units per token


class GameKind(str, Enum):
    STAG_HUNT = "stag_hunt"
    STAG_HUNT_COMM = "stag_hunt_comm"
    IPD2 = "ipd2"
    NIPD = "nipd"
    PGG = "pgg"
    IPGG_PUNISH = "ipgg_punish"


class NpdPayoffRule(str, Enum):
    """How an all-defect N-player PD round pays out.

    PAIRWISE_SUM: a defector earns 1 per defecting co-player (sum of pairwise
    games), so four defectors earn 3 each. BASE_PLUS_ONE: a defector earns a
    flat +1 regardless of how many others defect, so four defectors earn 1
    each. Both variants are selectable per GameSpec.
    """

    PAIRWISE_SUM = "pairwise_sum"
    BASE_PLUS_ONE = "base_plus_one"


class Phase(str, Enum):
    COMMUNICATE = "communicate"
    ACT = "act"
    CONTRIBUTE = "contribute"
    PUNISH = "punish"


class Choice(str, Enum):
    COOPERATE = "cooperate"
    DEFECT = "defect"
    HUNT_STAG = "hunt_stag"
    HUNT_HARE = "hunt_hare"

    @property
    def is_cooperative(self) -> bool:
        return self in (Choice.COOPERATE, Choice.HUNT_STAG)

    @property
    def display(self) -> str:
        return _CHOICE_DISPLAY[self]


_CHOICE_DISPLAY = {
    Choice.COOPERATE: "Cooperate",
    Choice.DEFECT: "Defect",
    Choice.HUNT_STAG: "Hunt Stag",
    Choice.HUNT_HARE: "Hunt Hare",
}

STAG_KINDS = frozenset({GameKind.STAG_HUNT, GameKind.STAG_HUNT_COMM})
PD_KINDS = frozenset({GameKind.IPD2, GameKind.NIPD})
BINARY_KINDS = STAG_KINDS | PD_KINDS
PGG_KINDS = frozenset({GameKind.PGG, GameKind.IPGG_PUNISH})

_PHASES: dict[GameKind, tuple[Phase, ...]] = {
    GameKind.STAG_HUNT: (Phase.ACT,),
    GameKind.STAG_HUNT_COMM: (Phase.COMMUNICATE, Phase.ACT),
    GameKind.IPD2: (Phase.ACT,),
    GameKind.NIPD: (Phase.ACT,),
    GameKind.PGG: (Phase.CONTRIBUTE,),
    GameKind.IPGG_PUNISH: (Phase.CONTRIBUTE, Phase.PUNISH),
}


class GameError(Exception):
    """Base for engine-level failures."""


class ArityError(GameError):
    pass


class PhaseError(GameError):
    pass


class TerminalError(GameError):
    pass


class DomainError(GameError):
    pass


@dataclass(frozen=True)
class GameSpec:
    """Which game to play and its payoff parameters."""

    game_kind: GameKind
    rounds: int
    n_players: int = 4
    endowment: int = 20
    multiplier: float = 1.6
    punish_ratio: float = 3.0
    npd_payoff_rule: NpdPayoffRule = NpdPayoffRule.PAIRWISE_SUM

    def __post_init__(self) -> None:
        expected_players = 2 if self.game_kind is GameKind.IPD2 else 4
        if self.n_players != expected_players:
            raise DomainError(
                f"{self.game_kind.value} requires {expected_players} players, got {self.n_players}"
            )
        if self.rounds < 1:
            raise DomainError("rounds must be >= 1")
        if self.endowment <= 0:
            raise DomainError("endowment must be positive")
        if self.punish_ratio <= 0:
            raise DomainError("punish_ratio must be positive")
        if self.game_kind in PGG_KINDS and self.multiplier / self.n_players >= 1:
            raise DomainError("multiplier/n_players must be < 1 (otherwise no dilemma)")

    @property
    def phases(self) -> tuple[Phase, ...]:
        return _PHASES[self.game_kind]

    @property
    def choice_family(self) -> tuple[Choice, Choice] | None:
        """(cooperative, defecting) choice pair for binary games, else None."""
        if self.game_kind in STAG_KINDS:
            return (Choice.HUNT_STAG, Choice.HUNT_HARE)
        if self.game_kind in PD_KINDS:
            return (Choice.COOPERATE, Choice.DEFECT)
        return None


@dataclass(frozen=True)
class BinaryAction:
    value: Choice


@dataclass(frozen=True)
class Contribution:
    amount: int

    def __post_init__(self) -> None:
        if not isinstance(self.amount, int) or isinstance(self.amount, bool):
            raise DomainError("contribution amount must be an integer")
        if self.amount < 0:
            raise DomainError("contribution amount must be non-negative")


@dataclass(frozen=True)
class PunishmentAllocation:
    """Tokens spent on other players, stored as sorted (target, spend) pairs.

    Targets are 1-based player ids. Duplicate targets must be summed before
    construction (the parser does this); zero spends are dropped.
    """

    spends: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[int, int] = {}
        for target, spend in self.spends:
            if not isinstance(spend, int) or isinstance(spend, bool):
                raise DomainError("punishment spend must be an integer")
            if spend < 0:
                raise DomainError("punishment spend must be non-negative")
            merged[target] = merged.get(target, 0) + spend
        canonical = tuple(sorted((t, s) for t, s in merged.items() if s > 0))
        object.__setattr__(self, "spends", canonical)

    @classmethod
    def from_mapping(cls, spends: Mapping[int, int]) -> "PunishmentAllocation":
        return cls(tuple(spends.items()))

    def as_dict(self) -> dict[int, int]:
        return dict(self.spends)

    @property
    def total(self) -> int:
        return sum(s for _, s in self.spends)


Action = Union[BinaryAction, Contribution, PunishmentAllocation, "Broadcast"]


@dataclass(frozen=True)
class Broadcast:
    word: str

    def __post_init__(self) -> None:
        if not self.word or any(c.isspace() for c in self.word):
            raise DomainError("broadcast word must be a single non-empty token")


@dataclass(frozen=True)
class PhaseActions:
    phase: Phase
    actions: tuple[Action, ...]  # index i is player i+1


@dataclass(frozen=True)
class RoundRecord:
    """One completed round: the actions of every phase plus the payoffs."""

    round_index: int  # 1-based
    phases: tuple[PhaseActions, ...]
    payoffs_tenths: tuple[int, ...]
    warnings: tuple[str, ...] = ()

    def actions_for(self, phase: Phase) -> tuple[Action, ...] | None:
        for pa in self.phases:
            if pa.phase is phase:
                return pa.actions
        return None

    @property
    def words(self) -> tuple[str, ...] | None:
        actions = self.actions_for(Phase.COMMUNICATE)
        if actions is None:
            return None
        return tuple(a.word for a in actions)  # type: ignore[union-attr]

    @property
    def contributions(self) -> tuple[int, ...] | None:
        actions = self.actions_for(Phase.CONTRIBUTE)
        if actions is None:
            return None
        return tuple(a.amount for a in actions)  # type: ignore[union-attr]


@dataclass(frozen=True)
class AbortInfo:
    round_index: int
    phase: Phase
    reason: str


@dataclass(frozen=True)
class GameLog:
    spec: GameSpec
    rounds: tuple[RoundRecord, ...]
    totals_tenths: tuple[int, ...]
    abort: AbortInfo | None = None

    @property
    def completed(self) -> bool:
        return self.abort is None and len(self.rounds) == self.spec.rounds


def tokens(tenths: int) -> float:
    """Fixed-point tenths to tokens, for display and analysis."""
    return tenths / TENTHS


def _as_tenths(value: Fraction) -> int:
    scaled = value * TENTHS
    if scaled.denominator == 1:
        return int(scaled)
    return round(scaled)  # non-default parameters may not be exact in tenths


# ---------------------------------------------------------------------------
# Payoff resolution (stateless, tenths in/out)
# ---------------------------------------------------------------------------


def resolve_stag_hunt(choices: Sequence[BinaryAction]) -> tuple[int, ...]:
    """All-stag pays 10 each; otherwise stag hunters 0, hare hunters 3."""
    if len(choices) != 4:
        raise ArityError(f"stag hunt takes 4 choices, got {len(choices)}")
    values = [c.value for c in choices]
    if any(v not in (Choice.HUNT_STAG, Choice.HUNT_HARE) for v in values):
        raise DomainError("stag hunt choices must be hunt_stag or hunt_hare")
    if all(v is Choice.HUNT_STAG for v in values):
        return (10 * TENTHS,) * 4
    return tuple(0 if v is Choice.HUNT_STAG else 3 * TENTHS for v in values)


def resolve_ipd2(a: BinaryAction, b: BinaryAction) -> tuple[int, int]:
    """Standard PD matrix: R=3, P=1, T=5, S=0."""
    for action in (a, b):
        if action.value not in (Choice.COOPERATE, Choice.DEFECT):
            raise DomainError("prisoner's dilemma choices must be cooperate or defect")
    table = {
        (Choice.COOPERATE, Choice.COOPERATE): (3, 3),
        (Choice.COOPERATE, Choice.DEFECT): (0, 5),
        (Choice.DEFECT, Choice.COOPERATE): (5, 0),
        (Choice.DEFECT, Choice.DEFECT): (1, 1),
    }
    pa, pb = table[(a.value, b.value)]
    return (pa * TENTHS, pb * TENTHS)


def resolve_nipd(
    choices: Sequence[BinaryAction],
    rule: NpdPayoffRule = NpdPayoffRule.PAIRWISE_SUM,
) -> tuple[int, ...]:
    """N-player PD: cooperators earn 3 per cooperating co-player.

    Defectors earn 5 per cooperating co-player plus, depending on the rule,
    1 per defecting co-player (PAIRWISE_SUM) or a flat 1 (BASE_PLUS_ONE).
    """
    if len(choices) != 4:
        raise ArityError(f"n-player PD takes 4 choices, got {len(choices)}")
    values = [c.value for c in choices]
    if any(v not in (Choice.COOPERATE, Choice.DEFECT) for v in values):
        raise DomainError("n-player PD choices must be cooperate or defect")
    n_others = len(values) - 1
    payoffs = []
    for i, v in enumerate(values):
        others_coop = sum(1 for j, w in enumerate(values) if j != i and w is Choice.COOPERATE)
        if v is Choice.COOPERATE:
            pay = 3 * others_coop
        elif rule is NpdPayoffRule.PAIRWISE_SUM:
            pay = 5 * others_coop + (n_others - others_coop)
        else:
            pay = 5 * others_coop + 1
        payoffs.append(pay * TENTHS)
    return tuple(payoffs)


def resolve_pgg(
    contribs: Sequence[Contribution], endowment: int, multiplier: float
) -> tuple[int, ...]:
    """payoff_i = (endowment - c_i) + multiplier * sum(c) / n, in tenths."""
    n = len(contribs)
    for c in contribs:
        if c.amount > endowment:
            raise DomainError(f"contribution {c.amount} exceeds endowment {endowment}")
    total = sum(c.amount for c in contribs)
    share = Fraction(str(multiplier)) * total / n
    return tuple(_as_tenths(Fraction(endowment - c.amount) + share) for c in contribs)


def apply_punishments(
    stage_tenths: Sequence[int],
    allocations: Sequence[PunishmentAllocation],
    punish_ratio: float = 3.0,
) -> tuple[int, ...]:
    """Subtract punishment costs simultaneously: spender loses 1 per token
    spent, target loses punish_ratio per token received. No floor."""
    n = len(stage_tenths)
    if len(allocations) != n:
        raise ArityError("one allocation per player required")
    ratio = Fraction(str(punish_ratio))
    spent = [0] * n
    received = [0] * n
    for i, alloc in enumerate(allocations):
        for target, spend in alloc.spends:
            if target == i + 1:
                raise DomainError(f"player {i + 1} cannot punish themselves")
            if not 1 <= target <= n:
                raise DomainError(f"punishment target {target} out of range")
            spent[i] += spend
            received[target - 1] += spend
    return tuple(
        stage_tenths[i]
        - spent[i] * TENTHS
        - _as_tenths(ratio * received[i])
        for i in range(n)
    )


def clamp_to_budget(
    allocations: Sequence[PunishmentAllocation], stage_tenths: Sequence[int]
) -> tuple[tuple[PunishmentAllocation, ...], tuple[str, ...]]:
    """Cap each player's total spend at their contribution-stage payoff.

    Spends are honored in ascending target order until the budget runs out;
    the excess is dropped with a warning. The rules never cap spend, so this
    is the harness's guard against unbounded negative totals.
    """
    clamped: list[PunishmentAllocation] = []
    warnings: list[str] = []
    for i, alloc in enumerate(allocations):
        budget = max(stage_tenths[i] // TENTHS, 0)
        if alloc.total <= budget:
            clamped.append(alloc)
            continue
        kept: dict[int, int] = {}
        remaining = budget
        for target, spend in alloc.spends:
            take = min(spend, remaining)
            if take > 0:
                kept[target] = take
            remaining -= take
        warnings.append(
            f"player {i + 1} punishment spend {alloc.total} clamped to budget {budget}"
        )
        clamped.append(PunishmentAllocation.from_mapping(kept))
    return tuple(clamped), tuple(warnings)


# ---------------------------------------------------------------------------
# Round-by-round state machine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameState:
    """Value-like game state; step() returns a new state."""

    spec: GameSpec
    round_index: int = 1
    phase_cursor: int = 0
    pending: tuple[PhaseActions, ...] = ()
    records: tuple[RoundRecord, ...] = ()
    totals_tenths: tuple[int, ...] = ()
    abort: AbortInfo | None = None

    @property
    def phase(self) -> Phase:
        return self.spec.phases[self.phase_cursor]


def new_game(spec: GameSpec) -> GameState:
    return GameState(spec=spec, totals_tenths=(0,) * spec.n_players)


def is_terminal(state: GameState) -> bool:
    return state.abort is not None or len(state.records) >= state.spec.rounds


def abort_game(state: GameState, reason: str) -> GameState:
    return replace(
        state, abort=AbortInfo(round_index=state.round_index, phase=state.phase, reason=reason)
    )


def _check_actions(spec: GameSpec, phase: Phase, actions: Sequence[Action]) -> None:
    if len(actions) != spec.n_players:
        raise ArityError(f"expected {spec.n_players} actions, got {len(actions)}")
    expected: type
    if phase is Phase.ACT:
        expected = BinaryAction
    elif phase is Phase.CONTRIBUTE:
        expected = Contribution
    elif phase is Phase.PUNISH:
        expected = PunishmentAllocation
    else:
        expected = Broadcast
    for a in actions:
        if not isinstance(a, expected):
            raise PhaseError(f"phase {phase.value} got {type(a).__name__}")
    if phase is Phase.ACT:
        family = spec.choice_family
        assert family is not None
        for a in actions:
            if a.value not in family:  # type: ignore[union-attr]
                raise DomainError(f"choice {a.value.value} not valid for {spec.game_kind.value}")
    if phase is Phase.CONTRIBUTE:
        for a in actions:
            if a.amount > spec.endowment:  # type: ignore[union-attr]
                raise DomainError(
                    f"contribution {a.amount} exceeds endowment {spec.endowment}"  # type: ignore[union-attr]
                )


def step(
    state: GameState, actions: Sequence[Action]
) -> tuple[GameState, RoundRecord | None]:
    """Apply one phase of simultaneous actions.

    Returns the new state and, when the phase completes a round, its
    RoundRecord (None for a mid-round phase such as communication).
    """
    if is_terminal(state):
        raise TerminalError("cannot step a finished game")
    spec = state.spec
    phase = state.phase
    _check_actions(spec, phase, actions)
    actions = tuple(actions)
    pending = state.pending + (PhaseActions(phase=phase, actions=actions),)

    if state.phase_cursor + 1 < len(spec.phases):
        return replace(state, phase_cursor=state.phase_cursor + 1, pending=pending), None

    payoffs, warnings, pending = _resolve_round(spec, pending)
    record = RoundRecord(
        round_index=state.round_index,
        phases=pending,
        payoffs_tenths=payoffs,
        warnings=warnings,
    )
    totals = tuple(t + p for t, p in zip(state.totals_tenths, payoffs))
    new_state = replace(
        state,
        round_index=state.round_index + 1,
        phase_cursor=0,
        pending=(),
        records=state.records + (record,),
        totals_tenths=totals,
    )
    return new_state, record


def _resolve_round(
    spec: GameSpec, phases: tuple[PhaseActions, ...]
) -> tuple[tuple[int, ...], tuple[str, ...], tuple[PhaseActions, ...]]:
    """Resolve a completed round; the returned phases carry the effective
    (budget-clamped) punishment allocations so logs can be replayed."""
    by_phase = {pa.phase: pa.actions for pa in phases}
    warnings: tuple[str, ...] = ()
    if spec.game_kind in STAG_KINDS:
        payoffs = resolve_stag_hunt(by_phase[Phase.ACT])  # type: ignore[arg-type]
    elif spec.game_kind is GameKind.IPD2:
        a, b = by_phase[Phase.ACT]
        payoffs = resolve_ipd2(a, b)  # type: ignore[arg-type]
    elif spec.game_kind is GameKind.NIPD:
        payoffs = resolve_nipd(by_phase[Phase.ACT], spec.npd_payoff_rule)  # type: ignore[arg-type]
    else:
        stage = resolve_pgg(by_phase[Phase.CONTRIBUTE], spec.endowment, spec.multiplier)  # type: ignore[arg-type]
        if spec.game_kind is GameKind.PGG:
            payoffs = stage
        else:
            raw = by_phase[Phase.PUNISH]
            clamped, warnings = clamp_to_budget(raw, stage)  # type: ignore[arg-type]
            if clamped != tuple(raw):
                phases = tuple(
                    PhaseActions(phase=pa.phase, actions=clamped)
                    if pa.phase is Phase.PUNISH
                    else pa
                    for pa in phases
                )
            payoffs = apply_punishments(stage, clamped, spec.punish_ratio)
    return payoffs, warnings, phases


def to_log(state: GameState) -> GameLog:
    return GameLog(
        spec=state.spec,
        rounds=state.records,
        totals_tenths=state.totals_tenths,
        abort=state.abort,
    )
