"""Metrics over game logs and CSV export for reporting.

Cooperation rate is the harness canon: for binary games the fraction of
cooperative decisions over all player-rounds; for the public-goods family
the mean of contribution/endowment over all player-rounds. Condition
statistics treat each trial's mean player payoff as one sample.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import stats as scipy_stats

from .games import (
    BINARY_KINDS,
    GameLog,
    PGG_KINDS,
    Phase,
    tokens,
)


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class ConditionStats:
    condition: str
    n_completed: int
    mean_payoff: float
    std_payoff: float | None  # sample (n-1); None when n < 2
    ci95_half_width: float | None
    pct_vs_control: float | None  # None for the control row itself


@dataclass(frozen=True)
class TrajectorySeries:
    """Per-round mean of player-level values (contribution tokens, or 0/1
    cooperation) with sample std and t-based 95% CI half-widths."""

    mean: tuple[float, ...]
    std: tuple[float | None, ...]
    ci95: tuple[float | None, ...]
    n_per_round: int


def _decisions(log: GameLog) -> tuple[list[float], int]:
    """(per player-round cooperation values in [0,1], count)."""
    if not log.completed:
        raise MetricsError("metrics require a completed log")
    kind = log.spec.game_kind
    values: list[float] = []
    if kind in BINARY_KINDS:
        for record in log.rounds:
            actions = record.actions_for(Phase.ACT)
            assert actions is not None
            values.extend(1.0 if a.value.is_cooperative else 0.0 for a in actions)  # type: ignore[union-attr]
    elif kind in PGG_KINDS:
        endowment = log.spec.endowment
        for record in log.rounds:
            contribs = record.contributions
            assert contribs is not None
            values.extend(c / endowment for c in contribs)
    else:  # pragma: no cover - all kinds are covered above
        raise MetricsError(f"no cooperation definition for {kind}")
    return values, len(values)


def cooperation_rate(log: GameLog) -> float:
    """Fraction in [0, 1] of cooperative behavior over all player-rounds."""
    values, count = _decisions(log)
    return math.fsum(values) / count


def per_round_cooperation(log: GameLog) -> list[float]:
    """Cooperation rate per round, same definition as cooperation_rate."""
    values, _ = _decisions(log)
    n = log.spec.n_players
    return [math.fsum(values[i : i + n]) / n for i in range(0, len(values), n)]


def trial_payoff(log: GameLog) -> float:
    """A trial's sample value: mean over players of final totals, in tokens."""
    if not log.completed:
        raise MetricsError("aborted trials have no payoff sample")
    return math.fsum(tokens(t) for t in log.totals_tenths) / len(log.totals_tenths)


def t_critical(dof: int, confidence: float = 0.95) -> float:
    return float(scipy_stats.t.ppf(0.5 + confidence / 2.0, dof))


def mean_std_ci(values: Sequence[float]) -> tuple[float, float | None, float | None]:
    if not values:
        raise MetricsError("empty sample")
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None, None
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    std = math.sqrt(var)
    ci = t_critical(n - 1) * std / math.sqrt(n)
    return mean, std, ci


def payoff_stats(
    condition: str, per_trial_payoffs: Sequence[float], control_mean: float | None = None
) -> ConditionStats:
    """Condition-level summary of per-trial mean payoffs.

    ``control_mean`` of None marks the control row: its pct column is
    undefined rather than zero.
    """
    mean, std, ci = mean_std_ci(per_trial_payoffs)
    pct = None
    if control_mean is not None:
        pct = 100.0 * (mean - control_mean) / control_mean
    return ConditionStats(
        condition=condition,
        n_completed=len(per_trial_payoffs),
        mean_payoff=mean,
        std_payoff=std,
        ci95_half_width=ci,
        pct_vs_control=pct,
    )


def _round_values(logs: Sequence[GameLog], round_index: int) -> list[float]:
    values: list[float] = []
    for log in logs:
        record = log.rounds[round_index]
        if log.spec.game_kind in PGG_KINDS:
            contribs = record.contributions
            assert contribs is not None
            values.extend(float(c) for c in contribs)
        else:
            actions = record.actions_for(Phase.ACT)
            assert actions is not None
            values.extend(1.0 if a.value.is_cooperative else 0.0 for a in actions)  # type: ignore[union-attr]
    return values


def contribution_trajectory(logs: Sequence[GameLog]) -> TrajectorySeries:
    """Round-wise mean over all players and trials of the same spec."""
    if not logs:
        raise MetricsError("no logs")
    spec = logs[0].spec
    for log in logs:
        if log.spec != spec:
            raise MetricsError("trajectory requires logs sharing one spec")
        if not log.completed:
            raise MetricsError("trajectory requires completed logs")
    means: list[float] = []
    stds: list[float | None] = []
    cis: list[float | None] = []
    for r in range(spec.rounds):
        values = _round_values(logs, r)
        mean, std, ci = mean_std_ci(values)
        means.append(mean)
        stds.append(std)
        cis.append(ci)
    return TrajectorySeries(
        mean=tuple(means), std=tuple(stds), ci95=tuple(cis),
        n_per_round=len(logs) * spec.n_players,
    )


def first_vs_last(series: TrajectorySeries) -> tuple[float, float, float]:
    """(first-round mean, last-round mean, last minus first)."""
    return series.mean[0], series.mean[-1], series.mean[-1] - series.mean[0]


def word_frequency(logs: Iterable[GameLog]) -> Counter[str]:
    """Case-folded histogram of all broadcast words."""
    counts: Counter[str] = Counter()
    saw_comm = False
    for log in logs:
        for record in log.rounds:
            words = record.words
            if words is None:
                continue
            saw_comm = True
            counts.update(w.casefold() for w in words)
    if not saw_comm:
        raise MetricsError("no communication phases in the given logs")
    return counts


@dataclass(frozen=True)
class StageMetrics:
    """Inputs the lesson prompt needs from one finished stage."""

    cooperation_rate: float  # fraction in [0, 1]
    avg_payoff: float  # tokens per player
    trajectory: tuple[float, ...]  # per-round cooperation fractions


def stage_metrics(log: GameLog) -> StageMetrics:
    return StageMetrics(
        cooperation_rate=cooperation_rate(log),
        avg_payoff=trial_payoff(log),
        trajectory=tuple(per_round_cooperation(log)),
    )


# ---------------------------------------------------------------------------
# CSV export (fixed columns, explicit precision)
# ---------------------------------------------------------------------------

CONDITION_STATS_HEADER = ["condition", "n", "mean", "std", "ci95", "pct_vs_control"]
TRAJECTORY_HEADER = ["condition", "round", "mean", "std", "ci95"]
TRIAL_TRAJECTORY_HEADER = ["condition", "trial", "round", "value"]
WORD_FREQUENCY_HEADER = ["word", "count"]


def _fmt(value: float | None, digits: int) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def condition_stats_csv(stats: Sequence[ConditionStats]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONDITION_STATS_HEADER)
    for s in stats:
        writer.writerow(
            [
                s.condition,
                s.n_completed,
                _fmt(s.mean_payoff, 1),
                _fmt(s.std_payoff, 1),
                _fmt(s.ci95_half_width, 2),
                _fmt(s.pct_vs_control, 1),
            ]
        )
    return out.getvalue()


def trajectory_csv(series_by_condition: dict[str, TrajectorySeries]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for condition in sorted(series_by_condition):
        series = series_by_condition[condition]
        for r, mean in enumerate(series.mean, start=1):
            writer.writerow(
                [
                    condition,
                    r,
                    _fmt(mean, 1),
                    _fmt(series.std[r - 1], 1),
                    _fmt(series.ci95[r - 1], 2),
                ]
            )
    return out.getvalue()


def trial_trajectory_csv(rows: Sequence[tuple[str, int, Sequence[float]]]) -> str:
    """Per-trial round means; rows are (condition, trial_index, values)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRIAL_TRAJECTORY_HEADER)
    for condition, trial, values in rows:
        for r, value in enumerate(values, start=1):
            writer.writerow([condition, trial, r, _fmt(value, 1)])
    return out.getvalue()


def word_frequency_csv(counts: Counter[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(WORD_FREQUENCY_HEADER)
    for word, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        writer.writerow([word, count])
    return out.getvalue()
