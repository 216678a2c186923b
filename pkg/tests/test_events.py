"""Event stream schema, reconstruction, and payoff revalidation."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dilemma_lab.config import default_mock_pool
from dilemma_lab.curriculum import ConditionName
from dilemma_lab.events import (
    EventError,
    TrialSink,
    load_batch,
    load_trial,
    read_events,
    spec_from_json,
    spec_to_json,
    validate_batch,
    validate_trial_file,
)
from dilemma_lab.games import GameKind, GameSpec
from dilemma_lab.metrics import cooperation_rate
from dilemma_lab.runner import ExperimentConfig, curriculum_plan, run_experiment


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("batch")
    config = ExperimentConfig(
        plans=[curriculum_plan(ConditionName.DIRECT_PRECURSOR)],
        pool=default_mock_pool(),
        out_dir=out,
        trials=2,
        master_seed=5,
    )
    run_experiment(config)
    return out


def trial_paths(batch: Path) -> list[Path]:
    return sorted((batch / "trials").glob("*.jsonl"))


def test_spec_json_roundtrip():
    spec = GameSpec(game_kind=GameKind.IPGG_PUNISH, rounds=10)
    assert spec_from_json(spec_to_json(spec)) == spec
    spec = GameSpec(game_kind=GameKind.IPD2, rounds=3, n_players=2)
    assert spec_from_json(spec_to_json(spec)) == spec


def test_sink_rejects_unknown_kind_and_missing_fields():
    sink = TrialSink()
    with pytest.raises(EventError):
        sink.emit("bogus", x=1)
    with pytest.raises(EventError):
        sink.emit("lesson", stage_index=1)


def test_pristine_batch_validates_clean(batch_dir):
    assert validate_batch(batch_dir) == []


def test_load_trial_reconstructs_logs(batch_dir):
    record = load_trial(trial_paths(batch_dir)[0])
    assert record.completed
    assert len(record.stage_logs) == 2
    final = record.final_log
    assert final.spec.game_kind is GameKind.IPGG_PUNISH
    assert len(final.rounds) == 10
    assert 0.0 <= cooperation_rate(final) <= 1.0
    assert record.final_metrics is not None
    assert abs(record.final_metrics["cooperation_rate"] - cooperation_rate(final)) < 1e-12


def test_load_batch(batch_dir):
    records = load_batch(batch_dir)
    assert len(records) == 2
    assert {r.trial_index for r in records} == {0, 1}


def test_corrupted_payoff_detected(tmp_path, batch_dir):
    src = trial_paths(batch_dir)[0]
    dest_dir = tmp_path / "bad" / "trials"
    dest_dir.mkdir(parents=True)
    lines = src.read_text().splitlines()
    corrupted = []
    for line in lines:
        obj = json.loads(line)
        if obj["kind"] == "round" and obj["stage_index"] == 2 and obj["round"] == 3:
            obj["payoffs_tenths"][1] += 10
        corrupted.append(json.dumps(obj, separators=(",", ":")))
    (dest_dir / src.name).write_text("\n".join(corrupted) + "\n")
    violations = validate_batch(tmp_path / "bad")
    assert violations, "corruption must be detected"
    assert any("round 3" in str(v) and "payoffs" in str(v) for v in violations)


def test_truncated_final_line_detected(tmp_path, batch_dir):
    src = trial_paths(batch_dir)[0]
    dest_dir = tmp_path / "trunc" / "trials"
    dest_dir.mkdir(parents=True)
    text = src.read_text()
    (dest_dir / src.name).write_text(text[: len(text) - 40])
    violations = validate_batch(tmp_path / "trunc")
    assert violations
    assert any("not valid JSON" in str(v) or "trial_end" in str(v) for v in violations)


def test_missing_field_detected(tmp_path, batch_dir):
    src = trial_paths(batch_dir)[0]
    dest_dir = tmp_path / "missing" / "trials"
    dest_dir.mkdir(parents=True)
    lines = [json.loads(l) for l in src.read_text().splitlines()]
    for obj in lines:
        if obj["kind"] == "round":
            del obj["totals_tenths"]
            break
    (dest_dir / src.name).write_text(
        "\n".join(json.dumps(o, separators=(",", ":")) for o in lines) + "\n"
    )
    violations = validate_batch(tmp_path / "missing")
    assert any("missing fields" in str(v) for v in violations)


def test_empty_dir_reports_no_files(tmp_path):
    violations = validate_batch(tmp_path / "nothing")
    assert len(violations) == 1
    assert "no trial files" in str(violations[0])


def test_read_events_reports_line_numbers(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text('{"kind":"trial_start"}\nnot json\n')
    with pytest.raises(EventError) as err:
        read_events(path)
    assert "x.jsonl:2" in str(err.value)


def test_validate_flags_wrong_round_index(tmp_path, batch_dir):
    src = trial_paths(batch_dir)[0]
    dest_dir = tmp_path / "idx" / "trials"
    dest_dir.mkdir(parents=True)
    lines = [json.loads(l) for l in src.read_text().splitlines()]
    for obj in lines:
        if obj["kind"] == "round" and obj["stage_index"] == 2 and obj["round"] == 5:
            obj["round"] = 6
            break
    (dest_dir / src.name).write_text(
        "\n".join(json.dumps(o, separators=(",", ":")) for o in lines) + "\n"
    )
    violations = validate_batch(tmp_path / "idx")
    assert any("round index" in str(v) for v in violations)
