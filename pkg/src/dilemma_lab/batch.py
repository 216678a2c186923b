"""Batch-level analysis: from trial event streams to tables and series.

Aborted trials are excluded from condition means but still counted, so a
condition's ``n`` reflects only completed trials.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from .events import TrialRecord, load_batch
from .metrics import (
    ConditionStats,
    MetricsError,
    TrajectorySeries,
    condition_stats_csv,
    contribution_trajectory,
    payoff_stats,
    per_round_cooperation,
    trajectory_csv,
    trial_payoff,
    trial_trajectory_csv,
    word_frequency,
    word_frequency_csv,
)

CONTROL_CONDITION = "control"


class BatchError(Exception):
    pass


def analyze_batch(in_dir: str | Path, out_dir: str | Path) -> dict:
    """Compute condition stats, trajectories, and word frequencies for one
    batch directory; write the CSVs and a JSON summary into ``out_dir``.

    Returns the summary document. Raises BatchError when the input has no
    completed trials.
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    trials = load_batch(in_dir)
    if not trials:
        raise BatchError(f"no trial files under {in_dir}")
    completed = [t for t in trials if t.completed]
    if not completed:
        raise BatchError(f"zero completed trials under {in_dir}")

    by_condition: dict[str, list[TrialRecord]] = {}
    for trial in completed:
        by_condition.setdefault(trial.condition, []).append(trial)
    aborted_counts = Counter(t.condition for t in trials if not t.completed)

    control_mean = None
    if CONTROL_CONDITION in by_condition:
        control_values = [trial_payoff(t.final_log) for t in by_condition[CONTROL_CONDITION]]
        control_mean = sum(control_values) / len(control_values)

    stats: list[ConditionStats] = []
    series: dict[str, TrajectorySeries] = {}
    trial_rows: list[tuple[str, int, list[float]]] = []
    for condition in sorted(by_condition):
        rows = sorted(by_condition[condition], key=lambda t: t.trial_index)
        values = [trial_payoff(t.final_log) for t in rows]
        stats.append(
            payoff_stats(
                condition,
                values,
                control_mean=None if condition == CONTROL_CONDITION else control_mean,
            )
        )
        series[condition] = contribution_trajectory([t.final_log for t in rows])
        for t in rows:
            trial_rows.append((condition, t.trial_index, _trial_round_means(t)))

    out_dir.mkdir(parents=True, exist_ok=True)
    written = {
        "condition_stats": out_dir / "condition_stats.csv",
        "trajectory": out_dir / "trajectory.csv",
        "trajectory_trials": out_dir / "trajectory_trials.csv",
    }
    written["condition_stats"].write_text(condition_stats_csv(stats), encoding="utf-8")
    written["trajectory"].write_text(trajectory_csv(series), encoding="utf-8")
    written["trajectory_trials"].write_text(trial_trajectory_csv(trial_rows), encoding="utf-8")

    word_counts = None
    try:
        word_counts = word_frequency([log for t in completed for log in t.stage_logs])
    except MetricsError:
        pass
    if word_counts is not None:
        written["word_frequency"] = out_dir / "word_frequency.csv"
        written["word_frequency"].write_text(word_frequency_csv(word_counts), encoding="utf-8")

    summary = {
        "conditions": [
            {
                "condition": s.condition,
                "n_completed": s.n_completed,
                "n_aborted": aborted_counts.get(s.condition, 0),
                "mean_payoff": s.mean_payoff,
                "std_payoff": s.std_payoff,
                "ci95_half_width": s.ci95_half_width,
                "pct_vs_control": s.pct_vs_control,
            }
            for s in stats
        ],
        "csv_files": {key: str(path.name) for key, path in written.items()},
    }
    (out_dir / "analysis.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary


def _trial_round_means(trial: TrialRecord) -> list[float]:
    log = trial.final_log
    if log.spec.game_kind.value in ("pgg", "ipgg_punish"):
        n = log.spec.n_players
        return [sum(r.contributions) / n for r in log.rounds]  # type: ignore[arg-type]
    return per_round_cooperation(log)


def export_from_analysis(analysis_path: str | Path, out_dir: str | Path) -> dict:
    """Re-emit the condition-stats CSV from a saved analysis.json (no log
    access needed): feeds the report package from an archived summary."""
    analysis_path = Path(analysis_path)
    out_dir = Path(out_dir)
    try:
        data = json.loads(analysis_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BatchError(f"cannot load analysis document {analysis_path}: {exc}") from exc
    try:
        stats = [
            ConditionStats(
                condition=row["condition"],
                n_completed=row["n_completed"],
                mean_payoff=row["mean_payoff"],
                std_payoff=row["std_payoff"],
                ci95_half_width=row["ci95_half_width"],
                pct_vs_control=row["pct_vs_control"],
            )
            for row in data["conditions"]
        ]
    except (KeyError, TypeError) as exc:
        raise BatchError(f"analysis document missing fields: {exc}") from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "condition_stats.csv"
    path.write_text(condition_stats_csv(stats), encoding="utf-8")
    return {"csv_files": {"condition_stats": path.name}}
