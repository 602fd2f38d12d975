import math

import pytest
from hypothesis import given, strategies as st

from justq.model import TosClass
from justq.policy import (
    CongestionDetector,
    LevelTable,
    Policy,
    PolicyConfig,
    UserScore,
    detect,
    flow_level,
    observe_arrival,
    user_level,
)

from helpers import pkt

C = 1000.0


def test_detect_quiet():
    assert detect(CongestionDetector(), 1.0, 0, 0.0, C) is False


def test_detect_rate_above_capacity():
    d = CongestionDetector(window=0.1)
    assert detect(d, 1.0, 0, 1.5 * C * 0.1, C) is True


def test_detect_strict_thresholds():
    d = CongestionDetector(window=0.1, backlog_threshold_packets=50)
    assert detect(d, 1.0, 50, C * 0.1, C) is False
    assert detect(d, 1.0, 51, 0.0, C) is True


def test_detector_hysteresis_holds_one_window():
    d = CongestionDetector(window=0.1, backlog_threshold_packets=5)
    assert d.evaluate(1.0, 6, C) is True
    assert d.evaluate(1.05, 0, C) is True   # held
    assert d.evaluate(1.1, 0, C) is False   # window over, re-evaluated


def test_detector_window_slides():
    d = CongestionDetector(window=0.1)
    d.record(0.0, 100)
    d.record(0.05, 100)
    assert d.record(0.1, 100) == 200  # the t=0 arrival has left (t > now - window)


@pytest.mark.parametrize("cls,expected", [(TosClass.VOICE, 1.0), (TosClass.BULK, 4.0)])
def test_flow_level_endpoints(cls, expected):
    assert flow_level(LevelTable(fl_scale=1.0), cls) == expected


def test_flow_level_default_for_unmapped():
    table = LevelTable(levels={TosClass.VOICE: 1.0}, default_level=3.0, fl_scale=1.0)
    assert flow_level(table, TosClass.VIDEO) == 3.0


def test_level_table_rejects_voice_above_bulk():
    with pytest.raises(ValueError):
        LevelTable(levels={TosClass.VOICE: 5.0, TosClass.BULK: 1.0})


def test_user_level_under_share():
    assert user_level(UserScore(1, ewma_rate=90.0, usr_scale=1.0, fair_share=100.0)) == 0.0


def test_user_level_double_share():
    assert user_level(UserScore(1, ewma_rate=200.0, usr_scale=1.0, fair_share=100.0)) == 100.0


def test_user_level_disabled():
    assert user_level(UserScore(1, ewma_rate=1e9, usr_scale=0.0, fair_share=100.0)) == 0.0


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 10), st.floats(1, 1e5))
def test_user_level_monotone(a, b, scale, share):
    lo, hi = sorted((a, b))
    s_lo = UserScore(1, lo, scale, share)
    s_hi = UserScore(1, hi, scale, share)
    assert 0 <= user_level(s_lo) <= user_level(s_hi)


def test_ewma_first_arrival():
    scores = observe_arrival({}, pkt(0, 1, 100, 0.0), 0.0, tau=1.0)
    assert scores[1].ewma_rate == 100.0


def test_ewma_decays():
    scores = observe_arrival({}, pkt(0, 1, 100, 0.0), 0.0, tau=1.0)
    observe_arrival(scores, pkt(1, 1, 1, 50.0), 50.0, tau=1.0)
    assert scores[1].ewma_rate < 1.01


def test_ewma_tracks_constant_rate():
    # Closed form after n arrivals spaced h apart: (L/tau) (1 - q^n) / (1 - q), q = exp(-h/tau).
    rate, length, tau = 1000.0, 10, 1.0
    h = length / rate
    n = int(5 * tau / h)
    scores = {}
    for i in range(n):
        observe_arrival(scores, pkt(i, 1, length, i * h), i * h, tau)
    q = math.exp(-h / tau)
    closed = (length / tau) * (1 - q ** n) / (1 - q)
    assert scores[1].ewma_rate == pytest.approx(closed, rel=1e-9)
    assert abs(scores[1].ewma_rate - rate) / rate < 0.05


def test_policy_zero_charge_when_not_congested():
    pol = Policy(PolicyConfig(usr_scale=5.0), C)
    ch = pol.on_arrival(pkt(0, 1, 10, 0.0), 0.0, backlog_packets=0)
    assert (ch.fl_le, ch.usr_le, ch.congested) == (0.0, 0.0, False)


def test_policy_charges_greedy_user_more():
    pol = Policy(PolicyConfig(usr_scale=0.01, backlog_threshold_packets=0), C)
    # user 2 floods, user 1 sends a trickle
    t = 0.0
    for i in range(200):
        t = i * 0.001
        pol.on_arrival(pkt(i, 2, 100, t, cls=TosClass.BULK), t, backlog_packets=10)
    honest = pol.on_arrival(pkt(999, 1, 100, t, cls=TosClass.VOICE), t, backlog_packets=10)
    greedy = pol.on_arrival(pkt(1000, 2, 100, t, cls=TosClass.BULK), t, backlog_packets=10)
    assert honest.congested and greedy.congested
    assert honest.usr_le == 0.0
    assert greedy.usr_le > 0.0
    assert honest.fl_le < greedy.fl_le
