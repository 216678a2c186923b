"""Prompt templates and deterministic rendering of game observations.

Template bodies live as plain-text assets and are filled through
``${name}`` / ``${name:fmt}`` placeholders. History rendering is fixed to
one line per round per phase so identical logs always produce identical
prompts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .games import (
    GameKind,
    GameSpec,
    Phase,
    RoundRecord,
)

NO_HISTORY_SENTINEL = "No previous rounds."
LESSON_HEADER = "### LESSONS FROM PREVIOUS GAMES"
LESSON_RULE = "-" * 50

_PLACEHOLDER_RE = re.compile(r"\$\{([^}]+)\}")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    required_placeholders: frozenset[str]


def _placeholder_name(inner: str) -> str:
    """Placeholder key: the part before a format spec, or the raw text for
    expression-style placeholders like ``rounds - round_num``."""
    if ":" in inner:
        name, _ = inner.split(":", 1)
        if _NAME_RE.match(name):
            return name
    return inner


@lru_cache(maxsize=None)
def load_template(template_id: str) -> PromptTemplate:
    body = (
        resources.files("dilemma_lab.assets").joinpath(f"{template_id}.txt").read_text()
    )
    names = frozenset(_placeholder_name(m.group(1)) for m in _PLACEHOLDER_RE.finditer(body))
    return PromptTemplate(template_id=template_id, body=body, required_placeholders=names)


def render_template(body: str, values: dict[str, object]) -> str:
    def fill(match: re.Match[str]) -> str:
        inner = match.group(1)
        if inner in values:
            return str(values[inner])
        if ":" in inner:
            name, spec = inner.split(":", 1)
            if _NAME_RE.match(name) and name in values:
                return format(values[name], spec)
        raise RenderError(f"missing placeholder value for ${{{inner}}}")

    return _PLACEHOLDER_RE.sub(fill, body)


_TEMPLATE_IDS: dict[tuple[GameKind, Phase], str] = {
    (GameKind.STAG_HUNT, Phase.ACT): "stag_hunt",
    (GameKind.STAG_HUNT_COMM, Phase.COMMUNICATE): "stag_hunt_comm_word",
    (GameKind.STAG_HUNT_COMM, Phase.ACT): "stag_hunt_comm_action",
    (GameKind.IPD2, Phase.ACT): "ipd2",
    (GameKind.NIPD, Phase.ACT): "nipd",
    (GameKind.PGG, Phase.CONTRIBUTE): "pgg",
    (GameKind.IPGG_PUNISH, Phase.CONTRIBUTE): "ipgg_punish",
    (GameKind.IPGG_PUNISH, Phase.PUNISH): "ipgg_punish",
}


def template_for(spec: GameSpec, phase: Phase) -> PromptTemplate:
    try:
        return load_template(_TEMPLATE_IDS[(spec.game_kind, phase)])
    except KeyError:
        raise RenderError(f"no template for {spec.game_kind.value}/{phase.value}") from None


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """Everything one player may see when asked to act."""

    player_id: int  # 1-based
    spec: GameSpec
    round_index: int
    phase: Phase
    history: tuple[RoundRecord, ...]
    history_text: str
    lessons: tuple[str, ...] = ()
    broadcast_words: tuple[str, ...] | None = None  # this round's words (comm action phase)
    current_contributions: tuple[int, ...] | None = None  # this round (punish phase)
    opponent_name: str | None = None


def _players_line(values: list[str]) -> str:
    return ", ".join(f"P{i + 1}={v}" for i, v in enumerate(values))


def render_history(spec: GameSpec, records: tuple[RoundRecord, ...]) -> str:
    """One line per round per phase, fixed field order."""
    lines: list[str] = []
    for record in records:
        r = record.round_index
        for pa in record.phases:
            if pa.phase is Phase.COMMUNICATE:
                lines.append(
                    f"Round {r} words: "
                    + _players_line([a.word for a in pa.actions])  # type: ignore[union-attr]
                )
            elif pa.phase is Phase.ACT:
                lines.append(
                    f"Round {r} actions: "
                    + _players_line([a.value.display for a in pa.actions])  # type: ignore[union-attr]
                )
            elif pa.phase is Phase.CONTRIBUTE:
                lines.append(
                    f"Round {r} contributions: "
                    + _players_line([str(a.amount) for a in pa.actions])  # type: ignore[union-attr]
                )
            else:
                rendered = []
                for a in pa.actions:
                    spends = a.spends  # type: ignore[union-attr]
                    rendered.append(
                        "[" + ", ".join(f"P{t}:{s}" for t, s in spends) + "]"
                    )
                lines.append(f"Round {r} punishments: " + _players_line(rendered))
    return "\n".join(lines)


def make_observation(
    spec: GameSpec,
    round_index: int,
    phase: Phase,
    records: tuple[RoundRecord, ...],
    player_id: int,
    lessons: tuple[str, ...] = (),
    current_words: tuple[str, ...] | None = None,
    current_contributions: tuple[int, ...] | None = None,
    opponent_name: str | None = None,
) -> Observation:
    """Build the observation (history text included) for one player/phase.

    ``current_*`` carry the revealed portion of the in-progress round: the
    broadcast words for a communication game's action phase, and the
    contributions for a punishment phase.
    """
    text = render_history(spec, records) or NO_HISTORY_SENTINEL
    if phase is Phase.PUNISH and current_contributions is not None:
        reveal = "Contributions this round: " + _players_line(
            [str(c) for c in current_contributions]
        )
        text = reveal if text == NO_HISTORY_SENTINEL else f"{text}\n{reveal}"
    return Observation(
        player_id=player_id,
        spec=spec,
        round_index=round_index,
        phase=phase,
        history=records,
        history_text=text,
        lessons=tuple(lessons),
        broadcast_words=current_words,
        current_contributions=current_contributions,
        opponent_name=opponent_name,
    )


_STAGE_NAMES = {Phase.CONTRIBUTE: "Contribution", Phase.PUNISH: "Punishment"}


def placeholder_values(obs: Observation) -> dict[str, object]:
    spec = obs.spec
    values: dict[str, object] = {
        "player_id": obs.player_id,
        "round_number": obs.round_index,
        "round_num": obs.round_index,
        "rounds": spec.rounds,
        "rounds - round_num": spec.rounds - obs.round_index,
        "n_players": spec.n_players,
        "game_history_string": obs.history_text,
    }
    if obs.broadcast_words is not None:
        values["communication_results_string"] = _players_line(list(obs.broadcast_words))
    if obs.opponent_name is not None:
        values["opponent_name"] = obs.opponent_name
    if obs.phase in _STAGE_NAMES:
        values["stage_name"] = _STAGE_NAMES[obs.phase]
    return values


def render_prompt(template: PromptTemplate, obs: Observation) -> str:
    """Fill a template from an observation, lesson block first."""
    filled = render_template(template.body, placeholder_values(obs))
    if not obs.lessons:
        return filled
    numbered = "\n".join(f"{i + 1}. {text}" for i, text in enumerate(obs.lessons))
    return f"{LESSON_HEADER}\n{numbered}\n{LESSON_RULE}\n{filled}"
