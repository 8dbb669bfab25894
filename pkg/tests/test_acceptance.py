"""One test per acceptance criterion; the terminal summary prints PASS/FAIL per criterion."""

import math
import random
import time

import pytest

from oracles import floyd_warshall_hops, fspl, random_connected_edges
from traces import expected_drop_index, replay, serving_anchor
from waphandoff.handoff import AttachTo, Attached, DeclareDrop, DetachFrom, HandoffConfig, SoftHandoff, anchors_of
from waphandoff.mobility import CircularPath, position_at
from waphandoff.radio import path_loss_db
from waphandoff.routing import DistanceVectorNetwork
from waphandoff.simulation import Simulation, compare
from waphandoff.stats import Classification, check_invariants, compare_values, load_published_table, load_polarity_table


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.2f}s, limit {self.limit}s"


@pytest.fixture(scope="module")
def arms(canonical):
    """Both canonical arms, with every stats snapshot checked as it is taken."""
    violations = []

    def watch(t, snapshot):
        violations.extend(f"t={t}: {v}" for v in check_invariants(snapshot))
        watch.count += 1

    watch.count = 0
    started = time.perf_counter()
    with_wap = Simulation(canonical.with_overrides(wap_enabled=True), on_snapshot=watch).run()
    without_wap = Simulation(canonical.with_overrides(wap_enabled=False), on_snapshot=watch).run()
    return {
        "with": with_wap,
        "without": without_wap,
        "violations": violations,
        "snapshots": watch.count,
        "elapsed": time.perf_counter() - started,
    }


@pytest.mark.criterion(1, "published-table regression 8/4/5 and 66.67%")
def test_criterion_1_published_table():
    with Timer(1.0):
        report = compare_values(load_published_table(), load_polarity_table())
    counts = report.counts()
    assert counts[Classification.IMPROVED] == 8
    assert counts[Classification.UNDESIRABLE] == 4
    assert counts[Classification.INSIGNIFICANT] == 5
    assert report.qos_score() == pytest.approx(66.67, abs=0.01)


@pytest.mark.criterion(2, "directional trends on the canonical scene")
def test_criterion_2_directions(arms):
    assert arms["elapsed"] < 10.0
    w, wo = arms["with"], arms["without"]
    table = {p.name: p for p in load_polarity_table()}
    report = compare(w, wo, table.values())
    value = {r.parameter.name: (r.without, r.with_wap) for r in report.rows}
    for name in ("ip_in_receives", "mac_broadcast_received", "bellman_ford_updates_received",
                 "link_utilization", "msc_packets_queued"):
        without, with_wap = value[name]
        assert with_wap > without, f"{name}: {without} -> {with_wap}"


@pytest.mark.criterion(3, "call continuity with WAPs, drop without")
def test_criterion_3_continuity(arms, canonical):
    assert arms["elapsed"] < 10.0
    w, wo = arms["with"], arms["without"]
    assert w.drops == 0
    visited = [n for n in w.attachment_sequence() if n in (3, 4, 5, 6, 7)]
    assert visited == [3, 4, 5, 6, 7]
    assert wo.drops >= 1
    drop = next(h for h in wo.handoff_log if h.type == "drop")
    # the drop happens on the upper arc, after leaving BS1 and before reaching BS2
    assert drop.from_node == 1
    _, y = position_at(canonical.node(10).mobility, drop.time)
    assert y > 0


@pytest.mark.criterion(4, "routing matches Floyd-Warshall on random topologies")
def test_criterion_4_routing_oracle():
    rng = random.Random(20240601)
    interval = 1_000_000
    with Timer(30.0):
        for trial in range(120):
            nodes, edges = random_connected_edges(rng, rng.randint(2, 8))
            net = DistanceVectorNetwork(link_delay_us=1000, advertisement_interval_us=interval, seed=trial)
            for n in nodes:
                net.add_node(n)
            for a, b in edges:
                net.add_link(a, b)
            net.start()
            net.run_for(3 * interval)
            oracle = floyd_warshall_hops(nodes, edges)
            for src in nodes:
                for dst in nodes:
                    assert net.tables[src].metric(dst) == oracle[src, dst], (trial, src, dst)


def random_trace(rng, nodes, length, lo=-105.0, hi=-50.0):
    trace = []
    level = {n: rng.uniform(lo, hi) for n in nodes}
    for _ in range(length):
        tick = {}
        for n in nodes:
            level[n] = min(hi, max(lo, level[n] + rng.gauss(0, 6)))
            tick[n] = None if rng.random() < 0.05 else level[n]
        trace.append(tick)
    return trace


@pytest.mark.criterion(5, "handoff property suite")
def test_criterion_5_handoff_properties():
    cfg = HandoffConfig()
    rng = random.Random(99)
    with Timer(30.0):
        # no ping-pong between two sub-hysteresis signals
        for _ in range(1000):
            trace = []
            for _ in range(rng.randint(5, 60)):
                base = rng.uniform(-100, -45)
                delta = rng.uniform(-0.999, 0.999) * cfg.hysteresis_margin
                trace.append({1: base, 2: base + delta} if rng.random() < 0.5 else {1: base + delta, 2: base})
            r = replay(trace, cfg, Attached(1))
            assert all(serving_anchor(s) in (1, None) for s in r.states)
            assert not any(isinstance(a, AttachTo) for acts in r.actions for a in acts)

        soft_seen = hard_seen = drops_seen = 0
        for _ in range(1000):
            attempts = rng.randint(1, 4)
            c = HandoffConfig(max_attempts=attempts)
            r = replay(random_trace(rng, [1, 2, 3, 4], rng.randint(5, 80)), c, Attached(1))
            prev_anchors = {1}
            for state, actions in zip(r.states, r.actions):
                if isinstance(state, SoftHandoff):
                    soft_seen += 1
                    # make before break: the old anchor is still held
                    assert state.old in prev_anchors and actions == (AttachTo(state.new),)
                if len(actions) == 2 and isinstance(actions[0], DetachFrom):
                    hard_seen += 1
                    # break then make within the same scan tick: gap 0 <= one scan interval
                    assert isinstance(actions[1], AttachTo)
                prev_anchors = set(anchors_of(state))
            for attached in r.attachments:
                assert len(attached) <= 2
            # after the first attachment the MS is never left with nothing unless the call dropped
            for i, attached in enumerate(r.after_step):
                if not attached:
                    assert i == len(r.after_step) - 1 and DeclareDrop() in r.actions[-1]
            dropped_at = next((i for i, a in enumerate(r.actions) if DeclareDrop() in a), None)
            assert dropped_at == expected_drop_index(r.failing_empty, attempts)
            drops_seen += dropped_at is not None
        assert soft_seen and hard_seen and drops_seen  # the random traces exercise every branch


@pytest.mark.criterion(6, "conservation invariants at every snapshot")
def test_criterion_6_conservation(arms):
    assert arms["snapshots"] >= 2 * 60
    assert arms["violations"] == []
    assert arms["with"].invariant_violations == [] and arms["without"].invariant_violations == []


@pytest.mark.criterion(7, "determinism of stats.csv and events.json")
def test_criterion_7_determinism(canonical):
    with Timer(10.0):
        for wap in (True, False):
            sc = canonical.with_overrides(wap_enabled=wap)
            a = Simulation(sc).run()
            b = Simulation(sc).run()
            assert a.stats_csv().encode() == b.stats_csv().encode()
            assert a.events_json().encode() == b.events_json().encode()


@pytest.mark.criterion(8, "numeric checks: path loss and circular periodicity")
def test_criterion_8_numeric():
    for d, f in ((1.0, 2400.0), (1000.0, 900.0), (250.0, 5000.0)):
        assert path_loss_db(d, f) == pytest.approx(fspl(d, f), abs=0.01)
    for d in (1.0, 37.5, 600.0, 12_345.0):
        assert path_loss_db(2 * d, 2400.0) - path_loss_db(d, 2400.0) == pytest.approx(6.0206, abs=1e-6)
    path = CircularPath(center=(0.0, 0.0), radius=600.0, angular_speed=-2 * math.pi / 60.0, start_angle=math.pi)
    for t in (0.0, 3.7, 17.25, 42.0):
        for k in (1, 2, 5):
            x0, y0 = position_at(path, t)
            x1, y1 = position_at(path, t + k * path.period)
            assert math.dist((x0, y0), (x1, y1)) <= 1e-9
