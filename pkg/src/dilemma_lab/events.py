"""JSONL trial event streams: schema, round-trip loading, and validation.

One file per trial, one JSON object per line, discriminated by ``kind``.
Validation replays every recorded round through the game engine and flags
any divergence between recorded and recomputed payoffs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .actions import ActionParseError, action_from_json, action_to_json
from .games import (
    AbortInfo,
    GameError,
    GameLog,
    GameSpec,
    Phase,
    is_terminal,
    new_game,
    step,
    to_log,
)

EVENT_KINDS: dict[str, tuple[str, ...]] = {
    "trial_start": ("trial_id", "condition", "trial_index", "seed", "role_assignment", "stage_count"),
    "stage_start": ("stage_index", "spec"),
    "prompt": ("stage_index", "round", "phase", "player", "agent_id", "attempt", "system", "user"),
    "exchange": ("stage_index", "round", "phase", "player", "agent_id", "provider",
                 "model_id", "attempt_count", "response_text", "latency_s"),
    "round": ("stage_index", "round", "phases", "payoffs_tenths", "totals_tenths", "warnings"),
    "lesson": ("stage_index", "game_name", "text", "generator_id", "generated_at"),
    "stage_end": ("stage_index", "status", "rounds_played", "totals_tenths"),
    "trial_end": ("trial_id", "status", "abort", "final_totals_tenths", "final_metrics"),
}


class EventError(Exception):
    pass


def event_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


class TrialSink:
    """Append-only event buffer for one trial, flushed to a JSONL file."""

    def __init__(self) -> None:
        self.events: list[dict] = []

    def emit(self, kind: str, **fields: object) -> None:
        if kind not in EVENT_KINDS:
            raise EventError(f"unknown event kind {kind!r}")
        missing = [f for f in EVENT_KINDS[kind] if f not in fields]
        if missing:
            raise EventError(f"{kind} event missing fields: {missing}")
        self.events.append({"kind": kind, **fields})

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = "".join(event_line(e) + "\n" for e in self.events)
        path.write_text(text, encoding="utf-8")


def spec_to_json(spec: GameSpec) -> dict:
    return {
        "game_kind": spec.game_kind.value,
        "n_players": spec.n_players,
        "rounds": spec.rounds,
        "endowment": spec.endowment,
        "multiplier": spec.multiplier,
        "punish_ratio": spec.punish_ratio,
        "npd_payoff_rule": spec.npd_payoff_rule.value,
    }


def spec_from_json(data: dict) -> GameSpec:
    from .games import GameKind, NpdPayoffRule

    return GameSpec(
        game_kind=GameKind(data["game_kind"]),
        n_players=int(data["n_players"]),
        rounds=int(data["rounds"]),
        endowment=int(data["endowment"]),
        multiplier=float(data["multiplier"]),
        punish_ratio=float(data["punish_ratio"]),
        npd_payoff_rule=NpdPayoffRule(data["npd_payoff_rule"]),
    )


def round_event_fields(spec: GameSpec, record, totals_tenths) -> dict:
    return {
        "round": record.round_index,
        "phases": [
            {
                "phase": pa.phase.value,
                "actions": [action_to_json(a) for a in pa.actions],
            }
            for pa in record.phases
        ],
        "payoffs_tenths": list(record.payoffs_tenths),
        "totals_tenths": list(totals_tenths),
        "warnings": list(record.warnings),
    }


def read_events(path: Path) -> list[dict]:
    """Parse a JSONL trial file; raises EventError with the bad line number."""
    events: list[dict] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise EventError(f"{path.name}:{lineno}: not valid JSON ({exc})") from exc
            if not isinstance(obj, dict) or "kind" not in obj:
                raise EventError(f"{path.name}:{lineno}: event must be an object with a 'kind'")
            events.append(obj)
    return events


@dataclass
class TrialRecord:
    """A trial reconstructed from its event stream."""

    trial_id: str
    condition: str
    trial_index: int
    seed: int
    role_assignment: dict[int, str]
    stage_logs: list[GameLog]
    status: str
    abort: dict | None
    final_metrics: dict | None
    lessons: list[dict] = field(default_factory=list)
    path: Path | None = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def final_log(self) -> GameLog:
        return self.stage_logs[-1]


def _rebuild_stage_log(spec: GameSpec, round_events: list[dict], aborted: bool) -> GameLog:
    """Replay recorded actions through the engine to rebuild the log."""
    state = new_game(spec)
    for event in round_events:
        for pa in event["phases"]:
            phase = Phase(pa["phase"])
            actions = [
                action_from_json(a, phase, spec, player_id=None)
                for a in pa["actions"]
            ]
            state, _ = step(state, actions)
    log = to_log(state)
    if aborted:
        # round/phase detail lives in the trial_end abort object
        from .games import abort_game

        log = to_log(abort_game(state, "recorded abort"))
    return log


def load_trial(path: Path) -> TrialRecord:
    events = read_events(path)
    if not events or events[0]["kind"] != "trial_start" or events[-1]["kind"] != "trial_end":
        raise EventError(f"{path.name}: stream must start with trial_start and end with trial_end")
    start = events[0]
    end = events[-1]
    stage_specs: dict[int, GameSpec] = {}
    stage_rounds: dict[int, list[dict]] = {}
    stage_status: dict[int, str] = {}
    lessons: list[dict] = []
    for event in events:
        kind = event["kind"]
        if kind == "stage_start":
            stage_specs[event["stage_index"]] = spec_from_json(event["spec"])
            stage_rounds.setdefault(event["stage_index"], [])
        elif kind == "round":
            stage_rounds[event["stage_index"]].append(event)
        elif kind == "stage_end":
            stage_status[event["stage_index"]] = event["status"]
        elif kind == "lesson":
            lessons.append(event)
    logs = [
        _rebuild_stage_log(
            stage_specs[i], stage_rounds[i], stage_status.get(i) == "aborted"
        )
        for i in sorted(stage_specs)
    ]
    return TrialRecord(
        trial_id=start["trial_id"],
        condition=start["condition"],
        trial_index=start["trial_index"],
        seed=start["seed"],
        role_assignment={int(k): v for k, v in start["role_assignment"].items()},
        stage_logs=logs,
        status=end["status"],
        abort=end["abort"],
        final_metrics=end["final_metrics"],
        lessons=lessons,
        path=path,
    )


def trial_files(batch_dir: Path) -> list[Path]:
    return sorted((batch_dir / "trials").glob("*.jsonl"))


def load_batch(batch_dir: Path) -> list[TrialRecord]:
    return [load_trial(p) for p in trial_files(batch_dir)]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    file: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = f"{self.file}:{self.line}" if self.line is not None else self.file
        return f"{where}: {self.message}"


def _schema_violations(path: Path, events: list[dict]) -> list[Violation]:
    out: list[Violation] = []
    for lineno, event in enumerate(events, start=1):
        kind = event.get("kind")
        if kind not in EVENT_KINDS:
            out.append(Violation(path.name, lineno, f"unknown event kind {kind!r}"))
            continue
        missing = [f for f in EVENT_KINDS[kind] if f not in event]
        if missing:
            out.append(Violation(path.name, lineno, f"{kind} missing fields {missing}"))
    return out


def _replay_violations(path: Path, events: list[dict]) -> list[Violation]:
    out: list[Violation] = []
    stage_specs: dict[int, GameSpec] = {}
    stage_states: dict[int, object] = {}
    line_of_round: dict[tuple[int, int], int] = {}
    for lineno, event in enumerate(events, start=1):
        kind = event["kind"]
        if kind == "stage_start":
            try:
                spec = spec_from_json(event["spec"])
            except (GameError, KeyError, ValueError) as exc:
                out.append(Violation(path.name, lineno, f"bad stage spec: {exc}"))
                continue
            stage_specs[event["stage_index"]] = spec
            stage_states[event["stage_index"]] = new_game(spec)
        elif kind == "round":
            stage = event["stage_index"]
            spec = stage_specs.get(stage)
            state = stage_states.get(stage)
            if spec is None or state is None:
                out.append(Violation(path.name, lineno, f"round before stage_start {stage}"))
                continue
            line_of_round[(stage, event["round"])] = lineno
            expected_round = len(state.records) + 1  # type: ignore[attr-defined]
            if event["round"] != expected_round:
                out.append(Violation(
                    path.name, lineno,
                    f"stage {stage}: round index {event['round']} expected {expected_round}",
                ))
                continue
            try:
                for pa in event["phases"]:
                    phase = Phase(pa["phase"])
                    actions = [action_from_json(a, phase, spec) for a in pa["actions"]]
                    state, record = step(state, actions)  # type: ignore[arg-type]
            except (ActionParseError, GameError, KeyError, ValueError) as exc:
                out.append(Violation(path.name, lineno, f"stage {stage}: replay failed: {exc}"))
                continue
            stage_states[stage] = state
            assert record is not None
            if list(record.payoffs_tenths) != event["payoffs_tenths"]:
                out.append(Violation(
                    path.name, lineno,
                    f"trial {path.stem} stage {stage} round {event['round']}: recorded payoffs "
                    f"{event['payoffs_tenths']} != recomputed {list(record.payoffs_tenths)}",
                ))
            if list(state.totals_tenths) != event["totals_tenths"]:  # type: ignore[attr-defined]
                out.append(Violation(
                    path.name, lineno,
                    f"trial {path.stem} stage {stage} round {event['round']}: recorded totals "
                    f"{event['totals_tenths']} != recomputed {list(state.totals_tenths)}",  # type: ignore[attr-defined]
                ))
        elif kind == "stage_end":
            stage = event["stage_index"]
            state = stage_states.get(stage)
            if state is None:
                out.append(Violation(path.name, lineno, f"stage_end before stage_start {stage}"))
                continue
            if list(state.totals_tenths) != event["totals_tenths"]:  # type: ignore[attr-defined]
                out.append(Violation(
                    path.name, lineno,
                    f"stage {stage} totals {event['totals_tenths']} != replayed "
                    f"{list(state.totals_tenths)}",  # type: ignore[attr-defined]
                ))
            if event["status"] == "completed" and not is_terminal(state):  # type: ignore[arg-type]
                out.append(Violation(
                    path.name, lineno,
                    f"stage {stage} marked completed after {len(state.records)} rounds",  # type: ignore[attr-defined]
                ))
    return out


def validate_trial_file(path: Path) -> list[Violation]:
    try:
        events = read_events(path)
    except EventError as exc:
        return [Violation(path.name, None, str(exc))]
    violations = _schema_violations(path, events)
    if not events:
        return [Violation(path.name, None, "empty event stream")]
    if events[0].get("kind") != "trial_start":
        violations.append(Violation(path.name, 1, "first event must be trial_start"))
    if events[-1].get("kind") != "trial_end":
        violations.append(Violation(path.name, len(events), "last event must be trial_end"))
    if not violations:
        violations.extend(_replay_violations(path, events))
    return violations


def validate_batch(batch_dir: Path) -> list[Violation]:
    files = trial_files(batch_dir)
    if not files:
        return [Violation(str(batch_dir), None, "no trial files found under trials/")]
    out: list[Violation] = []
    for path in files:
        out.extend(validate_trial_file(path))
    return out
