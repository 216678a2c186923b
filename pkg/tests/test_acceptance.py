"""Acceptance gate: one test per release criterion, exact tolerances.

Run with ``pytest tests/test_acceptance.py -v`` for a per-criterion
pass/fail line; each test also prints an ``[acceptance]`` marker.
"""

from __future__ import annotations

import json
import math
import random
import time
from pathlib import Path

import pytest

from test_games import IPD2_TABLE, NIPD_BASE_PLUS_ONE_TABLE, NIPD_PAIRWISE_TABLE, STAG_HUNT_TABLE

from dilemma_lab.batch import analyze_batch
from dilemma_lab.cli import EXIT_OK, main
from dilemma_lab.config import default_mock_pool
from dilemma_lab.curriculum import ConditionName
from dilemma_lab.games import (
    BinaryAction,
    Contribution,
    GameKind,
    GameSpec,
    NpdPayoffRule,
    PunishmentAllocation,
    apply_punishments,
    resolve_ipd2,
    resolve_nipd,
    resolve_pgg,
    resolve_stag_hunt,
)
from dilemma_lab.metrics import mean_std_ci, payoff_stats
from dilemma_lab.runner import (
    AgentPool,
    AgentSpec,
    ScriptedSeat,
    TrialSink,
    curriculum_plan,
    derive_seed,
    run_game,
)
from dilemma_lab.prompts import Observation
from dilemma_lab.strategies import ScriptedBehavior, StrategyKind, StrategySpec

# frozen t quantile (dof=2, 97.5%); independent anchor for the CI oracle
T_CRIT_DOF2 = 4.302652729911275


def _stamp(name: str) -> None:
    print(f"[acceptance] {name}: PASS")


def test_criterion_payoff_oracle_exhaustiveness():
    started = time.perf_counter()
    for profile, expected in STAG_HUNT_TABLE.items():
        got = resolve_stag_hunt([BinaryAction(v) for v in profile])
        assert got == tuple(10 * p for p in expected), f"stag hunt {profile}"
    for profile, expected in IPD2_TABLE.items():
        got = resolve_ipd2(BinaryAction(profile[0]), BinaryAction(profile[1]))
        assert got == tuple(10 * p for p in expected), f"ipd2 {profile}"
    for rule, table in (
        (NpdPayoffRule.PAIRWISE_SUM, NIPD_PAIRWISE_TABLE),
        (NpdPayoffRule.BASE_PLUS_ONE, NIPD_BASE_PLUS_ONE_TABLE),
    ):
        assert len(table) == 16
        for profile, expected in table.items():
            got = resolve_nipd([BinaryAction(v) for v in profile], rule)
            assert got == tuple(10 * p for p in expected), f"nipd {rule} {profile}"
    assert time.perf_counter() - started < 1.0
    _stamp("payoff oracle exhaustiveness (16+4+16x2 profiles, exact)")


def test_criterion_pgg_marginal_property():
    started = time.perf_counter()
    rng = random.Random(20240817)
    for _ in range(1000):
        amounts = [rng.randint(0, 19) for _ in range(4)]
        i = rng.randrange(4)
        bumped = list(amounts)
        bumped[i] += 1
        base = resolve_pgg([Contribution(a) for a in amounts], 20, 1.6)
        after = resolve_pgg([Contribution(a) for a in bumped], 20, 1.6)
        assert after[i] - base[i] == -6  # exactly -0.6 tokens in tenths
        for j in range(4):
            if j != i:
                assert after[j] - base[j] == 4  # others gain the 0.4 share
    assert time.perf_counter() - started < 1.0
    _stamp("pgg marginal return -0.6 over 1000 random profiles (exact)")


def test_criterion_punishment_accounting():
    rng = random.Random(99)
    for _ in range(1000):
        stage = tuple(rng.randint(80, 350) for _ in range(4))
        allocations = []
        spent = [0] * 4
        received = [0] * 4
        for i in range(4):
            spends = {}
            for target in range(1, 5):
                if target == i + 1 or rng.random() < 0.5:
                    continue
                spend = rng.randint(0, 4)
                if spend:
                    spends[target] = spend
                    spent[i] += spend
                    received[target - 1] += spend
            allocations.append(PunishmentAllocation.from_mapping(spends))
        out = apply_punishments(stage, allocations, 3.0)
        total_spend = sum(spent)
        # group payoff drops by exactly (1 + 3) tokens per token spent
        assert sum(stage) - sum(out) == 4 * total_spend * 10
        # spender/target decomposition: -1/token spent, -3/token received
        for i in range(4):
            assert stage[i] - out[i] == (spent[i] + 3 * received[i]) * 10
    _stamp("punishment accounting 4x spend + decomposition over 1000 sets (exact)")


def test_criterion_scripted_tournament_oracle():
    tft = ScriptedBehavior(binary=StrategySpec(StrategyKind.TIT_FOR_TAT))
    alld = ScriptedBehavior(binary=StrategySpec(StrategyKind.ALWAYS_DEFECT))
    spec = GameSpec(game_kind=GameKind.IPD2, rounds=3, n_players=2)
    seats = [
        ScriptedSeat("tft", tft, random.Random(0)),
        ScriptedSeat("alld", alld, random.Random(1)),
    ]
    log = run_game(spec, seats, [], TrialSink(), 1)
    # hand-played transcript: (C,D)->(0,5), (D,D)->(1,1), (D,D)->(1,1)
    assert [r.payoffs_tenths for r in log.rounds] == [(0, 50), (10, 10), (10, 10)]
    assert log.totals_tenths == (20, 70)

    fixed10 = ScriptedBehavior(
        contribution=StrategySpec(StrategyKind.FIXED_CONTRIBUTION, amount=10)
    )
    spec = GameSpec(game_kind=GameKind.PGG, rounds=3)
    seats = [ScriptedSeat(f"f{i}", fixed10, random.Random(i)) for i in range(4)]
    log = run_game(spec, seats, [], TrialSink(), 1)
    # (20-10) + 1.6*40/4 = 26 tokens per player per round
    assert all(r.payoffs_tenths == (260, 260, 260, 260) for r in log.rounds)
    assert log.totals_tenths == (780,) * 4
    _stamp("scripted tournament: TFT-vs-AllD (2,7) and fixed-10 PGG 26/round (exact)")


def test_criterion_end_to_end_determinism(tmp_path):
    started = time.perf_counter()

    def run_batch(out: Path) -> dict[str, bytes]:
        code = main([
            "run", "--condition", "full_curriculum", "--trials", "2",
            "--mock", "--seed", "1234", "--out", str(out),
        ])
        assert code == EXIT_OK
        return {
            str(p.relative_to(out)): p.read_bytes()
            for p in sorted(out.rglob("*"))
            if p.is_file()
        }

    first = run_batch(tmp_path / "one")
    second = run_batch(tmp_path / "two")
    assert first == second, "mock reruns must be byte-identical"
    assert sum(name.endswith(".jsonl") for name in first) == 2

    # final-stage prompt carries exactly the three lessons, in stage order
    trial = tmp_path / "one" / "trials" / "full_curriculum_000.jsonl"
    events = [json.loads(line) for line in trial.read_text().splitlines()]
    lessons = [e for e in events if e["kind"] == "lesson"]
    assert [l["stage_index"] for l in lessons] == [1, 2, 3]
    final_prompt = next(
        e for e in events if e["kind"] == "prompt" and e["stage_index"] == 4
    )["user"]
    positions = [final_prompt.find(l["text"]) for l in lessons]
    assert all(p >= 0 for p in positions), "all three lessons must appear"
    assert positions == sorted(positions), "lessons must appear in stage order"
    block = final_prompt[: final_prompt.index("-" * 50)]
    assert [block.count(f"{k}. Lesson from") for k in (1, 2, 3)] == [1, 1, 1]
    assert block.count("Lesson from") == 3, "exactly three lessons"

    assert main(["validate", "--in", str(tmp_path / "one")]) == EXIT_OK
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    _stamp(f"end-to-end determinism + 3 ordered lessons + validate ({elapsed:.1f}s)")


def test_criterion_failure_accounting(tmp_path):
    behavior = ScriptedBehavior(
        contribution=StrategySpec(StrategyKind.FIXED_CONTRIBUTION, amount=10)
    )
    pool_entries = []
    for i, agent_id in enumerate(["m1", "m2", "m3", "m4"]):
        pool_entries.append(
            AgentSpec(
                agent_id=agent_id,
                family=f"fam{i}",
                kind="mock",
                behavior=behavior,
                garbage_trials=frozenset({1}) if agent_id == "m3" else frozenset(),
            )
        )
    from dilemma_lab.runner import ExperimentConfig, run_experiment

    out = tmp_path / "batch"
    summary = run_experiment(
        ExperimentConfig(
            plans=[curriculum_plan(ConditionName.CONTROL)],
            pool=AgentPool(agents=tuple(pool_entries)),
            out_dir=out,
            trials=3,
            master_seed=6,
        )
    )
    assert summary["conditions"]["control"]["aborted"] == 1
    assert summary["conditions"]["control"]["completed"] == 2
    analysis = analyze_batch(out, tmp_path / "analysis")
    row = analysis["conditions"][0]
    assert row["n_completed"] == 3 - 1  # trials - 1, the N=29 bookkeeping
    assert row["n_aborted"] == 1
    _stamp("failure accounting: 1 aborted trial, n_completed = trials - 1 (exact)")


def test_criterion_metrics_oracle():
    # cooperation rate: brute-force count over a hand-built fixture
    from dilemma_lab.games import GameLog, Phase, PhaseActions, RoundRecord
    from dilemma_lab.games import Choice
    from dilemma_lab.metrics import cooperation_rate

    S, H = Choice.HUNT_STAG, Choice.HUNT_HARE
    rounds_choices = [(S, S, H, H), (S, H, S, H), (H, S, H, S)]
    spec = GameSpec(game_kind=GameKind.STAG_HUNT, rounds=3)
    records = tuple(
        RoundRecord(
            round_index=i + 1,
            phases=(PhaseActions(Phase.ACT, tuple(BinaryAction(v) for v in values)),),
            payoffs_tenths=(0,) * 4,
        )
        for i, values in enumerate(rounds_choices)
    )
    log = GameLog(spec=spec, rounds=records, totals_tenths=(0,) * 4)
    brute_rate = sum(
        1 for values in rounds_choices for v in values if v is S
    ) / (3 * 4)
    assert abs(cooperation_rate(log) - brute_rate) <= 1e-9 * brute_rate

    # mean / sample std / t-CI against two-pass brute force with a frozen t
    values = [211.7, 199.0, 182.0]
    mean, std, ci = mean_std_ci(values)
    brute_mean = sum(values) / 3
    brute_var = sum((v - brute_mean) ** 2 for v in values) / 2
    brute_std = math.sqrt(brute_var)
    brute_ci = T_CRIT_DOF2 * brute_std / math.sqrt(3)
    assert abs(mean - brute_mean) <= 1e-9 * abs(brute_mean)
    assert abs(std - brute_std) <= 1e-9 * brute_std
    assert abs(ci - brute_ci) <= 1e-9 * brute_ci

    # percent-vs-control formula on the (200, 150) fixture
    stats = payoff_stats("condition", [150.0], control_mean=200.0)
    assert stats.pct_vs_control == -25.0
    _stamp("metrics oracle: rate/mean/std/CI <=1e-9 rel, pct fixture -25.0 (exact)")


class _WordSeat(ScriptedSeat):
    """Scripted seat that broadcasts a unique per-round word and records
    every observation it is shown."""

    def __init__(self, agent_id: str, player_id: int, rng: random.Random):
        super().__init__(
            agent_id,
            ScriptedBehavior(binary=StrategySpec(StrategyKind.RANDOM_BERNOULLI, p=0.5)),
            rng,
        )
        self.player_id = player_id
        self.sent_words: dict[int, str] = {}
        self.seen: list[Observation] = []

    def decide(self, obs: Observation):
        self.seen.append(obs)
        from dilemma_lab.games import Broadcast, Phase

        if obs.phase is Phase.COMMUNICATE:
            word = f"w{self.player_id}r{obs.round_index}x{self.rng.randrange(10**6)}"
            self.sent_words[obs.round_index] = word
            return Broadcast(word)
        return super().decide(obs)


def test_criterion_communication_protocol():
    from dilemma_lab.games import Phase

    spec = GameSpec(game_kind=GameKind.STAG_HUNT_COMM, rounds=3)
    for game_index in range(100):
        seats = [
            _WordSeat(f"a{p}", p, random.Random(derive_seed("comm", game_index, p)))
            for p in range(1, 5)
        ]
        run_game(spec, seats, [], TrialSink(), 1)
        for seat in seats:
            act_obs = [o for o in seat.seen if o.phase is Phase.ACT]
            assert len(act_obs) == 3
            for obs in act_obs:
                r = obs.round_index
                expected = tuple(s.sent_words[r] for s in seats)
                assert obs.broadcast_words == expected, "all 4 words of this round"
                later_words = {
                    w for s in seats for rr, w in s.sent_words.items() if rr > r
                }
                # neither current slot nor rendered history leaks future rounds
                leaked = later_words & set(obs.broadcast_words)
                assert not leaked
                assert not any(w in obs.history_text for w in later_words)
                earlier = {w for s in seats for rr, w in s.sent_words.items() if rr < r}
                for w in earlier:
                    assert w in obs.history_text
    _stamp("communication protocol: same-round words only, 100 seeded games")
