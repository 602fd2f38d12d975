import pytest
from hypothesis import given, strategies as st

from justq.errors import TimeRegression
from justq.vclock import GpsVirtualTime, VirtualClock


def test_advance_two_equal_weights():
    c = VirtualClock(capacity=1.0, active_weight_sum=2.0)
    assert c.advance(10.0) == pytest.approx(5.0, abs=1e-9)


def test_idle_freezes():
    c = VirtualClock(capacity=1.0, last_virtual=7.0)
    assert c.advance(10.0) == 7.0
    assert c.last_real == 10.0


def test_advance_single_weight_two():
    c = VirtualClock(capacity=1000.0, active_weight_sum=2.0)
    assert c.advance(1.0) == pytest.approx(500.0, abs=1e-9)


def test_time_regression():
    c = VirtualClock(capacity=1.0, last_real=5.0)
    with pytest.raises(TimeRegression):
        c.advance(4.0)
    with pytest.raises(TimeRegression):
        c.on_backlog_change(4.0, 1.0)


def test_backlog_change_then_new_slope():
    c = VirtualClock(capacity=1.0, active_weight_sum=2.0)
    c.on_backlog_change(10.0, 1.0)
    assert c.last_virtual == pytest.approx(5.0, abs=1e-9)
    assert c.advance(12.0) == pytest.approx(7.0, abs=1e-9)


def test_zero_elapsed_change_keeps_v():
    c = VirtualClock(capacity=3.0, last_real=2.0, last_virtual=4.0, active_weight_sum=1.0)
    c.on_backlog_change(2.0, 6.0)
    assert c.last_virtual == 4.0
    assert c.active_weight_sum == 6.0


def test_three_segments():
    c = VirtualClock(capacity=6.0)
    gains = []
    prev = 0.0
    for t, w in [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 0.0)]:
        c.on_backlog_change(t, w)
        gains.append(c.last_virtual - prev)
        prev = c.last_virtual
    assert gains[1:] == pytest.approx([6.0, 2.0, 3.0], abs=1e-9)


@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 5)), min_size=1, max_size=30))
def test_monotone(steps):
    c = VirtualClock(capacity=100.0)
    t, last = 0.0, 0.0
    for dt, w in steps:
        t += dt
        c.on_backlog_change(t, w)
        assert c.last_virtual >= last
        last = c.last_virtual


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(1, 1000))
def test_piecewise_linear_between_changes(w, span, cap):
    c = VirtualClock(capacity=cap)
    c.on_backlog_change(1.0, w)
    v0 = c.last_virtual
    samples = [c.advance(1.0 + span * f) - v0 for f in (0.25, 0.5, 0.75)]
    slope = cap / w
    assert samples == pytest.approx([slope * span * f for f in (0.25, 0.5, 0.75)], rel=1e-9)


def test_gps_tracker_breaks_segment_when_flow_drains():
    # Two flows of weight 1 at C=1; flow 1 has 2 bytes of virtual work, flow 2 has 10.
    g = GpsVirtualTime(1.0, {1: 1.0, 2: 1.0})
    g.at(0.0)
    g.note_finish(0.0, 1, 2.0)
    g.note_finish(0.0, 2, 10.0)
    # V reaches 2 at t=4 (slope 1/2), then slope 1: V(6) = 4.
    assert g.at(6.0) == pytest.approx(4.0, abs=1e-12)
    assert g.backlogged == {2}
    # Flow 2 drains at V=10, t=12; afterwards V freezes.
    assert g.at(20.0) == pytest.approx(10.0, abs=1e-12)
    assert g.backlogged == frozenset()


def test_gps_tracker_reset_on_idle():
    g = GpsVirtualTime(1.0, {1: 1.0}, reset_on_idle=True)
    g.at(0.0)
    g.note_finish(0.0, 1, 5.0)
    assert g.at(10.0) == 0.0
    assert g.epoch == 1
