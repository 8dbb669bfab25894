import pytest
from hypothesis import given, strategies as st

from waphandoff.engine import Engine, EventKind, ScheduleInPastError, node_rng, seconds_to_us

K = EventKind.STATS_SAMPLE


def recorder(engine, log):
    return lambda tag: log.append((engine.now, tag))


def test_event_at_now_fires_before_later_events():
    engine, log = Engine(), []
    rec = recorder(engine, log)
    engine.schedule(5, K, rec, "later")
    engine.schedule(0, K, rec, "now")
    engine.run_until(10)
    assert [tag for _, tag in log] == ["now", "later"]


def test_same_time_events_fire_in_insertion_order():
    engine, log = Engine(), []
    rec = recorder(engine, log)
    engine.schedule(7, K, rec, "e1")
    engine.schedule(7, K, rec, "e2")
    engine.run_until(7)
    assert [tag for _, tag in log] == ["e1", "e2"]


def test_schedule_in_past_rejected():
    engine = Engine()
    engine.run_until(10)
    with pytest.raises(ScheduleInPastError):
        engine.schedule(9, K, lambda: None)


def test_cancel_semantics():
    engine, log = Engine(), []
    eid = engine.schedule(3, K, log.append, "x")
    assert engine.cancel(eid) is True
    assert engine.cancel(eid) is False
    engine.run_until(5)
    assert log == []

    fired = engine.schedule(6, K, log.append, "y")
    engine.run_until(6)
    assert log == ["y"]
    assert engine.cancel(fired) is False
    assert engine.cancel(12345) is False


def test_run_until_empty_queue_advances_clock():
    engine = Engine()
    assert engine.run_until(10) == 0
    assert engine.now == 10


def test_run_until_processes_only_due_events():
    engine, log = Engine(), []
    for t in (1, 2, 3):
        engine.schedule(t, K, log.append, t)
    assert engine.run_until(2) == 2
    assert log == [1, 2]
    assert engine.now == 2
    assert engine.run_until(5) == 1


def test_clock_never_decreases_and_run_until_past_rejected():
    engine = Engine()
    engine.run_until(5)
    with pytest.raises(ScheduleInPastError):
        engine.run_until(4)


def test_handlers_can_schedule_more_events():
    engine, log = Engine(), []

    def tick(n):
        log.append(engine.now)
        if n:
            engine.schedule_in(10, K, tick, n - 1)

    engine.schedule(0, K, tick, 3)
    engine.run_until(100)
    assert log == [0, 10, 20, 30]


@given(st.lists(st.integers(min_value=0, max_value=50), max_size=60))
def test_processing_order_is_time_then_seq(times):
    engine = Engine(record_trace=True)
    for t in times:
        engine.schedule(t, K, lambda: None)
    engine.run_until(100)
    keys = [(t, seq) for t, seq, _ in engine.trace]
    assert keys == sorted(keys)
    assert len(keys) == len(times)
    assert len(set(keys)) == len(keys)


def test_node_rng_is_per_node_and_reproducible():
    a1 = [node_rng(1, 10).random() for _ in range(3)]
    a2 = [node_rng(1, 10).random() for _ in range(3)]
    assert a1 == a2
    assert node_rng(1, 10).random() != node_rng(1, 11).random()
    assert node_rng(1, 10).random() != node_rng(2, 10).random()


def test_seconds_to_us():
    assert seconds_to_us(0.5) == 500_000
    assert seconds_to_us(60.0) == 60_000_000
