"""Robust extraction and validation of structured actions from model text.

Models wrap their JSON in prose and code fences; :func:`extract_json` digs
out the first balanced object that carries an ``"action"`` key, and
:func:`parse_action` validates the per-phase schema against the game spec.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .games import (
    Action,
    BinaryAction,
    Broadcast,
    Choice,
    Contribution,
    GameSpec,
    Phase,
    PunishmentAllocation,
)


class ActionParseError(Exception):
    """Base for parse failures; ``kind`` is machine-readable."""

    kind = "parse"


class NoJsonFound(ActionParseError):
    kind = "no_json"


class SchemaMismatch(ActionParseError):
    kind = "schema"


class OutOfRange(ActionParseError):
    kind = "out_of_range"


class UnknownPlayer(ActionParseError):
    kind = "unknown_player"


@dataclass(frozen=True)
class AgentResponse:
    raw_text: str
    reasoning: str
    action: Action


def _balanced_object(text: str, start: int) -> str | None:
    """Return the balanced {...} substring starting at ``start``, if any."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def extract_json(raw: str) -> str:
    """First balanced top-level JSON object containing an "action" key.

    Code fences and surrounding prose are ignored; objects that parse but
    lack the key are skipped (which also descends into wrappers like
    ``{"response": {"action": ...}}``).
    """
    for i, ch in enumerate(raw):
        if ch != "{":
            continue
        candidate = _balanced_object(raw, i)
        if candidate is None:
            continue
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and "action" in obj:
            return candidate
    raise NoJsonFound("no JSON object with an 'action' key found in output")


_CHOICE_STRINGS = {
    "hunt stag": Choice.HUNT_STAG,
    "hunt hare": Choice.HUNT_HARE,
    "cooperate": Choice.COOPERATE,
    "defect": Choice.DEFECT,
}


def parse_action(
    json_text: str, phase: Phase, spec: GameSpec, player_id: int | None = None
) -> Action:
    """Validate one phase's action JSON against the spec's bounds.

    ``player_id`` (1-based), when given, lets punish actions reject
    self-targeting at parse time so the retry loop can ask for a fix.
    """
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaMismatch("top-level JSON value must be an object")
    if "action" not in obj:
        raise SchemaMismatch("missing 'action' key")
    return action_from_json(obj["action"], phase, spec, player_id)


def action_from_json(
    inner: object, phase: Phase, spec: GameSpec, player_id: int | None = None
) -> Action:
    """Validate an already-decoded action object (the value of "action")."""
    if not isinstance(inner, dict):
        raise SchemaMismatch("'action' must be a JSON object")
    if phase is Phase.ACT:
        return _parse_choice(inner, spec)
    if phase is Phase.CONTRIBUTE:
        return _parse_contribute(inner, spec)
    if phase is Phase.PUNISH:
        return _parse_punish(inner, spec, player_id)
    return _parse_communicate(inner)


def _require_type(inner: dict, expected: str) -> None:
    declared = inner.get("type")
    if not isinstance(declared, str) or declared.strip().lower() != expected:
        raise SchemaMismatch(f"action type must be '{expected}', got {declared!r}")


def _parse_choice(inner: dict, spec: GameSpec) -> BinaryAction:
    raw = inner.get("choice")
    if not isinstance(raw, str):
        raise SchemaMismatch("'choice' must be a string")
    choice = _CHOICE_STRINGS.get(raw.strip().lower())
    if choice is None:
        raise SchemaMismatch(f"unrecognized choice {raw!r}")
    family = spec.choice_family
    if family is None or choice not in family:
        raise SchemaMismatch(f"choice {raw!r} not valid for {spec.game_kind.value}")
    return BinaryAction(choice)


def _parse_contribute(inner: dict, spec: GameSpec) -> Contribution:
    _require_type(inner, "contribute")
    amount = inner.get("amount")
    if not isinstance(amount, int) or isinstance(amount, bool):
        raise SchemaMismatch(f"'amount' must be an integer, got {amount!r}")
    if not 0 <= amount <= spec.endowment:
        raise OutOfRange(f"amount {amount} outside [0, {spec.endowment}]")
    return Contribution(amount)


def _parse_punish(inner: dict, spec: GameSpec, player_id: int | None) -> PunishmentAllocation:
    _require_type(inner, "punish")
    targets = inner.get("targets")
    if not isinstance(targets, list):
        raise SchemaMismatch("'targets' must be a list")
    spends: dict[int, int] = {}
    for entry in targets:
        if not isinstance(entry, dict):
            raise SchemaMismatch("each target must be an object")
        target = entry.get("player_id")
        spend = entry.get("spend_amount")
        if not isinstance(target, int) or isinstance(target, bool):
            raise SchemaMismatch(f"'player_id' must be an integer, got {target!r}")
        if not isinstance(spend, int) or isinstance(spend, bool):
            raise SchemaMismatch(f"'spend_amount' must be an integer, got {spend!r}")
        if spend < 0:
            raise OutOfRange(f"spend_amount {spend} is negative")
        if not 1 <= target <= spec.n_players:
            raise UnknownPlayer(f"player_id {target} not in 1..{spec.n_players}")
        if player_id is not None and target == player_id:
            raise SchemaMismatch("cannot punish yourself")
        spends[target] = spends.get(target, 0) + spend  # repeated ids are summed
    return PunishmentAllocation.from_mapping(spends)


def _parse_communicate(inner: dict) -> Broadcast:
    _require_type(inner, "communicate")
    word = inner.get("word")
    if not isinstance(word, str):
        raise SchemaMismatch("'word' must be a string")
    token = word.strip().split()[0] if word.strip() else ""
    if not token:
        raise SchemaMismatch("'word' must contain a non-empty token")
    return Broadcast(token)


def parse_response(
    raw: str, phase: Phase, spec: GameSpec, player_id: int | None = None
) -> AgentResponse:
    """Extract, validate, and package a model reply."""
    json_text = extract_json(raw)
    obj = json.loads(json_text)
    reasoning = obj.get("reasoning")
    action = parse_action(json_text, phase, spec, player_id)
    return AgentResponse(
        raw_text=raw,
        reasoning=reasoning if isinstance(reasoning, str) else "",
        action=action,
    )


def action_to_json(action: Action) -> dict:
    """Wire shape for one action (same schema the prompts ask for)."""
    if isinstance(action, BinaryAction):
        return {"choice": action.value.display}
    if isinstance(action, Contribution):
        return {"type": "contribute", "amount": action.amount}
    if isinstance(action, PunishmentAllocation):
        return {
            "type": "punish",
            "targets": [
                {"player_id": t, "spend_amount": s} for t, s in action.spends
            ],
        }
    if isinstance(action, Broadcast):
        return {"type": "communicate", "word": action.word}
    raise TypeError(f"not an action: {action!r}")
