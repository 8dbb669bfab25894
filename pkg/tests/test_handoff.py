import pytest
from hypothesis import given, settings, strategies as st

from traces import expected_drop_index, replay, serving_anchor
from waphandoff.handoff import (
    AttachTo,
    Attached,
    DeclareDrop,
    DetachFrom,
    Dropped,
    HandoffConfig,
    HandoffType,
    Scanning,
    SoftHandoff,
    Unattached,
    anchors_of,
    classify_handoff_type,
    scan_candidates,
    select_best,
    step,
)
from waphandoff.radio import RadioProfile, SignalSample

CFG = HandoffConfig()
BS1, WAP = 1, 3
WAP_RADIO = RadioProfile(tx_power=0.0, frequency=2400.0, sensitivity=-95.0, lock_threshold=-90.0, error_floor_margin=3.0)


def s(node, power):
    return SignalSample(node, power, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        HandoffConfig(drop_threshold=-80.0, candidate_threshold=-85.0)
    with pytest.raises(ValueError):
        HandoffConfig(hysteresis_margin=-1.0)
    with pytest.raises(ValueError):
        HandoffConfig(max_attempts=0)


def test_scan_nothing_in_range():
    far = [(3, WAP_RADIO, (10_000.0, 0.0)), (4, WAP_RADIO, (0.0, 10_000.0))]
    assert scan_candidates((0.0, 0.0), far, CFG.candidate_threshold) == []


def test_scan_tie_breaks_by_node_id():
    pair = [(7, WAP_RADIO, (-20.0, 0.0)), (4, WAP_RADIO, (20.0, 0.0))]
    got = scan_candidates((0.0, 0.0), pair, CFG.candidate_threshold)
    assert [c.source for c in got] == [4, 7]
    assert got[0].rx_power == got[1].rx_power


def test_scan_sorted_strongest_first():
    txs = [(3, WAP_RADIO, (50.0, 0.0)), (4, WAP_RADIO, (10.0, 0.0)), (5, WAP_RADIO, (30.0, 0.0))]
    got = scan_candidates((0.0, 0.0), txs, CFG.candidate_threshold)
    assert [c.source for c in got] == [4, 5, 3]


def test_select_best():
    assert select_best([]) is None
    assert select_best([s(4, -55), s(3, -60), s(5, -70)]) == 4
    assert select_best(sorted([s(4, -55), s(3, -55)], key=lambda c: (-c.rx_power, c.source))) == 3


def test_classify_boundaries():
    assert classify_handoff_type(CFG.soft_threshold, CFG) is HandoffType.SOFT
    assert classify_handoff_type(CFG.soft_threshold - 0.1, CFG) is HandoffType.HARD
    assert classify_handoff_type(None, CFG) is HandoffType.HARD


def test_stay_attached_with_strong_anchor():
    assert step(Attached(BS1), -60.0, [s(BS1, -60.0), s(WAP, -62.0)], CFG) == (Attached(BS1), ())


def test_hysteresis_blocks_marginal_candidate():
    assert step(Attached(BS1), -70.0, [s(WAP, -67.5)], CFG) == (Attached(BS1), ())
    state, actions = step(Attached(BS1), -70.0, [s(WAP, -66.9)], CFG, now=2.0)
    assert state == SoftHandoff(BS1, WAP, 2.0) and actions == (AttachTo(WAP),)


def test_soft_handoff_sequence():
    state, actions = step(Attached(BS1), -89.0, [s(WAP, -80.0)], CFG, now=1.0)
    assert state == SoftHandoff(BS1, WAP, 1.0)
    assert actions == (AttachTo(WAP),)
    assert anchors_of(state) == (WAP, BS1)
    state, actions = step(state, -89.5, [s(WAP, -80.0)], CFG, now=1.5)
    assert state == Attached(WAP) and actions == (DetachFrom(BS1),)


def test_hard_handoff_breaks_before_make():
    state, actions = step(Attached(BS1), -93.0, [s(WAP, -80.0)], CFG)
    assert state == Attached(WAP)
    assert actions == (DetachFrom(BS1), AttachTo(WAP))
    state, actions = step(Attached(BS1), None, [s(WAP, -80.0)], CFG)
    assert actions == (DetachFrom(BS1), AttachTo(WAP))


def test_failing_anchor_without_candidates_starts_scanning():
    assert step(Attached(BS1), -89.0, [], CFG) == (Scanning(BS1, 1), ())


def test_scanning_exhaustion_drops():
    assert step(Scanning(BS1, CFG.max_attempts), -95.0, [], CFG) == (Dropped(), (DeclareDrop(),))
    assert step(Scanning(BS1, 1), -95.0, [], CFG) == (Scanning(BS1, 2), ())


def test_scanning_finds_candidate_and_hands_over():
    state, actions = step(Scanning(BS1, 2), None, [s(WAP, -84.0)], CFG)
    assert state == Attached(WAP)
    assert actions == (DetachFrom(BS1), AttachTo(WAP))


def test_scanning_recovers_when_anchor_returns():
    assert step(Scanning(BS1, 2), -70.0, [s(BS1, -70.0)], CFG) == (Attached(BS1), ())


def test_dropped_is_terminal():
    assert step(Dropped(), -50.0, [s(WAP, -40.0)], CFG) == (Dropped(), ())


def test_unattached_attaches_to_best():
    assert step(Unattached(), None, [s(WAP, -60.0), s(BS1, -70.0)], CFG) == (Attached(WAP), (AttachTo(WAP),))
    assert step(Unattached(), None, [], CFG) == (Unattached(1), ())


def test_soft_handoff_needs_distinct_nodes():
    with pytest.raises(ValueError):
        SoftHandoff(1, 1, 0.0)


# property tests

rssi = st.one_of(st.none(), st.floats(min_value=-110.0, max_value=-40.0, allow_nan=False))
ticks = st.lists(st.dictionaries(st.sampled_from([1, 2, 3, 4]), rssi, min_size=1), min_size=1, max_size=40)


@st.composite
def close_pairs(draw):
    """Two transmitters whose powers differ by less than the hysteresis margin at every tick."""
    n = draw(st.integers(min_value=1, max_value=60))
    out = []
    for _ in range(n):
        base = draw(st.floats(min_value=-100.0, max_value=-40.0))
        delta = draw(st.floats(min_value=-CFG.hysteresis_margin, max_value=CFG.hysteresis_margin, exclude_min=True, exclude_max=True))
        out.append({1: base, 2: base + delta})
    return out


@settings(max_examples=300, deadline=None)
@given(close_pairs())
def test_no_ping_pong(trace):
    r = replay(trace, CFG, Attached(1))
    assert all(a == () or a == (DeclareDrop(),) for a in r.actions)
    assert all(serving_anchor(x) in (1, None) for x in r.states)


@settings(max_examples=300, deadline=None)
@given(ticks)
def test_make_before_break_and_attachment_bounds(trace):
    r = replay(trace, CFG, Attached(1))
    prev = {1}
    for state, actions in zip(r.states, r.actions):
        if AttachTo in {type(a) for a in actions} and isinstance(state, SoftHandoff):
            assert state.old in prev  # old link still held when new one is made
        prev = set(anchors_of(state))
    for attached in r.attachments:
        assert len(attached) <= 2
    # every soft detach leaves the new anchor attached
    for i, state in enumerate(r.states):
        if i and isinstance(r.states[i - 1], SoftHandoff):
            assert r.actions[i] == (DetachFrom(r.states[i - 1].old),)
            assert state == Attached(r.states[i - 1].new)


@settings(max_examples=300, deadline=None)
@given(ticks)
def test_hard_handoff_gap_within_one_tick(trace):
    r = replay(trace, CFG, Attached(1))
    for actions in r.actions:
        if actions and isinstance(actions[0], DetachFrom) and len(actions) == 2:
            assert isinstance(actions[1], AttachTo)  # re-attached within the same scan tick


@settings(max_examples=300, deadline=None)
@given(ticks, st.integers(min_value=1, max_value=5))
def test_drop_iff_streak_exhausts_attempts(trace, attempts):
    cfg = HandoffConfig(max_attempts=attempts)
    r = replay(trace, cfg, Attached(1))
    dropped_at = next((i for i, a in enumerate(r.actions) if DeclareDrop() in a), None)
    assert dropped_at == expected_drop_index(r.failing_empty, attempts)
    for state in r.states:
        if isinstance(state, Scanning):
            assert state.failed_attempts <= attempts


@settings(max_examples=100, deadline=None)
@given(ticks)
def test_step_is_pure(trace):
    a = replay(trace, CFG, Attached(1))
    b = replay(trace, CFG, Attached(1))
    assert a.states == b.states and a.actions == b.actions
