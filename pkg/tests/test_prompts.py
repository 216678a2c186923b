"""Template rendering and history determinism."""

from __future__ import annotations

import pytest

from dilemma_lab.games import (
    BinaryAction,
    Broadcast,
    Choice,
    Contribution,
    GameKind,
    GameSpec,
    Phase,
    PhaseActions,
    PunishmentAllocation,
    RoundRecord,
)
from dilemma_lab.prompts import (
    LESSON_HEADER,
    NO_HISTORY_SENTINEL,
    Observation,
    RenderError,
    load_template,
    make_observation,
    render_history,
    render_prompt,
    render_template,
    template_for,
)

S, H = Choice.HUNT_STAG, Choice.HUNT_HARE

STAG = GameSpec(game_kind=GameKind.STAG_HUNT, rounds=3)
COMM = GameSpec(game_kind=GameKind.STAG_HUNT_COMM, rounds=3)
IPD = GameSpec(game_kind=GameKind.IPD2, rounds=3, n_players=2)
PGGP = GameSpec(game_kind=GameKind.IPGG_PUNISH, rounds=10)


def stag_round(r, values, payoffs):
    return RoundRecord(
        round_index=r,
        phases=(PhaseActions(Phase.ACT, tuple(BinaryAction(v) for v in values)),),
        payoffs_tenths=payoffs,
    )


def test_templates_load_with_expected_placeholders():
    t = load_template("stag_hunt")
    assert {"player_id", "round_number", "game_history_string"} <= t.required_placeholders
    t = load_template("ipd2")
    assert "rounds - round_num" in t.required_placeholders
    t = load_template("lesson")
    assert {"cooperation_rate", "previous_lessons_string"} <= t.required_placeholders


def test_round_one_uses_sentinel():
    obs = make_observation(STAG, 1, Phase.ACT, (), player_id=2)
    text = render_prompt(template_for(STAG, Phase.ACT), obs)
    assert NO_HISTORY_SENTINEL in text
    assert "You are Player 2" in text
    assert "${" not in text


def test_lessons_prepended_in_order():
    obs = make_observation(
        PGGP, 1, Phase.CONTRIBUTE, (), player_id=1,
        lessons=("first lesson", "second lesson"),
    )
    text = render_prompt(template_for(PGGP, Phase.CONTRIBUTE), obs)
    assert text.startswith(LESSON_HEADER)
    assert text.index("first lesson") < text.index("second lesson") < text.index("GAME RULES")


def test_comm_action_phase_shows_all_words():
    obs = make_observation(
        COMM, 1, Phase.ACT, (), player_id=1,
        current_words=("stag", "stag", "hare", "stag"),
    )
    text = render_prompt(template_for(COMM, Phase.ACT), obs)
    assert "P1=stag, P2=stag, P3=hare, P4=stag" in text


def test_comm_action_phase_without_words_fails():
    obs = make_observation(COMM, 1, Phase.ACT, (), player_id=1)
    with pytest.raises(RenderError):
        render_prompt(template_for(COMM, Phase.ACT), obs)


def test_ipd_template_fills_opponent_and_remaining_rounds():
    obs = make_observation(IPD, 2, Phase.ACT, (), player_id=1, opponent_name="qwen")
    text = render_prompt(template_for(IPD, Phase.ACT), obs)
    assert "against qwen" in text
    assert "This is Round 2 of 3" in text
    assert "Rounds remaining after this: 1" in text


def test_punish_phase_reveals_current_contributions():
    obs = make_observation(
        PGGP, 1, Phase.PUNISH, (), player_id=1,
        current_contributions=(12, 10, 15, 8),
    )
    text = render_prompt(template_for(PGGP, Phase.PUNISH), obs)
    assert "Contributions this round: P1=12, P2=10, P3=15, P4=8" in text
    assert "**Punishment** stage" in text


def test_contribute_phase_stage_name():
    obs = make_observation(PGGP, 1, Phase.CONTRIBUTE, (), player_id=3)
    text = render_prompt(template_for(PGGP, Phase.CONTRIBUTE), obs)
    assert "**Contribution** stage" in text


def test_history_one_line_per_phase():
    records = (
        RoundRecord(
            round_index=1,
            phases=(
                PhaseActions(Phase.CONTRIBUTE, (Contribution(10), Contribution(0), Contribution(20), Contribution(5))),
                PhaseActions(Phase.PUNISH, (
                    PunishmentAllocation.from_mapping({2: 1}),
                    PunishmentAllocation(),
                    PunishmentAllocation(),
                    PunishmentAllocation(),
                )),
            ),
            payoffs_tenths=(0, 0, 0, 0),
        ),
    )
    text = render_history(PGGP, records)
    assert text == (
        "Round 1 contributions: P1=10, P2=0, P3=20, P4=5\n"
        "Round 1 punishments: P1=[P2:1], P2=[], P3=[], P4=[]"
    )


def test_history_comm_round():
    records = (
        RoundRecord(
            round_index=1,
            phases=(
                PhaseActions(Phase.COMMUNICATE, tuple(Broadcast(w) for w in ("a", "b", "c", "d"))),
                PhaseActions(Phase.ACT, tuple(BinaryAction(v) for v in (S, H, S, S))),
            ),
            payoffs_tenths=(0, 30, 0, 0),
        ),
    )
    text = render_history(COMM, records)
    assert "Round 1 words: P1=a, P2=b, P3=c, P4=d" in text
    assert "Round 1 actions: P1=Hunt Stag, P2=Hunt Hare" in text


def test_render_injective_in_round_index():
    records = (stag_round(1, (S, S, S, S), (100,) * 4),)
    seen = set()
    for r in (1, 2, 3):
        obs = make_observation(STAG, r, Phase.ACT, records if r > 1 else (), player_id=1)
        seen.add(render_prompt(template_for(STAG, Phase.ACT), obs))
    assert len(seen) == 3


def test_render_is_deterministic():
    records = (stag_round(1, (S, H, S, H), (0, 30, 0, 30)),)
    obs1 = make_observation(STAG, 2, Phase.ACT, records, player_id=4, lessons=("l1",))
    obs2 = make_observation(STAG, 2, Phase.ACT, records, player_id=4, lessons=("l1",))
    t = template_for(STAG, Phase.ACT)
    assert render_prompt(t, obs1) == render_prompt(t, obs2)


def test_render_template_missing_placeholder_named():
    with pytest.raises(RenderError) as err:
        render_template("hello ${who}", {})
    assert "who" in str(err.value)


def test_render_template_format_spec():
    assert render_template("rate ${x:.1f}%", {"x": 48.333}) == "rate 48.3%"


def test_template_bodies_keep_fixed_round_count_text():
    # the stag hunt and punish-game rule text hard-codes "10 rounds"
    assert "last for 10 rounds" in load_template("stag_hunt").body
    assert "last for 10 rounds" in load_template("ipgg_punish").body
