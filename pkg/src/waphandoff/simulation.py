"""Running a scenario: nodes, IP forwarding, traffic, and handoff execution.

Every BS, access point and mobile station has a radio MAC on one shared
channel; BSs, access points and the MSC are also joined by wired backhaul
links. All nodes run distance-vector routing. The mobile station places a
call to the MSC: it sends voice packets to its serving anchor, which routes
them to the MSC, and the MSC answers each one with a downlink packet
tunnelled back through whichever anchor the mobile last registered.
"""

from __future__ import annotations

import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .engine import Engine, EventKind, node_rng, seconds_to_us, us_to_seconds
from .handoff import (
    AttachTo,
    Attached,
    DeclareDrop,
    DetachFrom,
    Dropped,
    HandoffState,
    Scanning,
    SoftHandoff,
    Unattached,
    anchors_of,
    scan_candidates,
    step,
)
from .mac import BROADCAST, Channel, Frame, FrameKind, RadioMac, WiredPort
from .radio import distance, path_loss_db, received_power_dbm
from .routing import RoutingTable, triggered_delay_us
from .scenario import NodeSpec, Scenario
from .stats import (
    DEFAULT_EPSILON,
    DEFAULT_FLOOR,
    ComparisonReport,
    LayerEvent,
    LayerStats,
    ParameterPolarity,
    StatsRegistry,
    check_invariants,
    compare_values,
    metric_value,
    write_stats_csv,
)

logger = logging.getLogger(__name__)

IP_UDP_HEADER_BYTES = 28
DATA_TTL = 64
ROUTING_TTL = 1


class ComparisonMismatchError(ValueError):
    """Raised when two runs did not come from the same scenario geometry and seed."""


@dataclass
class Packet:
    src: int
    dst: int
    kind: FrameKind
    size: int
    ttl: int
    payload: Any = None
    via: int | None = None  # tunnel endpoint for downlink to a mobile


@dataclass(frozen=True)
class HandoffRecord:
    time: float
    from_node: int | None
    to_node: int | None
    type: str  # attach | soft | hard | drop


@dataclass
class RunOutput:
    scenario_name: str
    fingerprint: str
    seed: int
    wap_enabled: bool
    duration: float
    stats: dict[int, LayerStats]
    kinds: dict[int, str]
    handoff_log: list[HandoffRecord] = field(default_factory=list)
    attachments: list[tuple[float, int]] = field(default_factory=list)
    drops: int = 0
    invariant_violations: list[str] = field(default_factory=list)
    events_processed: int = 0

    def stats_csv(self) -> str:
        buf = io.StringIO()
        write_stats_csv(self.stats, buf)
        return buf.getvalue()

    def events_json(self) -> str:
        doc = {
            "schema_version": 1,
            "scenario": self.scenario_name,
            "fingerprint": self.fingerprint,
            "seed": self.seed,
            "wap_enabled": self.wap_enabled,
            "duration_s": self.duration,
            "drops": self.drops,
            "handoffs": [
                {"time_s": r.time, "from": r.from_node, "to": r.to_node, "type": r.type}
                for r in self.handoff_log
            ],
            "attachments": [{"time_s": t, "node": n} for t, n in self.attachments],
        }
        return json.dumps(doc, indent=2) + "\n"

    def write(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "stats.csv").write_text(self.stats_csv(), encoding="utf-8")
        (directory / "events.json").write_text(self.events_json(), encoding="utf-8")

    def attachment_sequence(self) -> list[int]:
        """Serving anchors in visiting order, consecutive repeats collapsed."""
        seq: list[int] = []
        for _, node in self.attachments:
            if not seq or seq[-1] != node:
                seq.append(node)
        return seq


class NetworkNode:
    def __init__(self, sim: "Simulation", spec: NodeSpec) -> None:
        self.sim = sim
        self.spec = spec
        self.id = spec.id
        self.kind = spec.kind
        self.rng = node_rng(sim.scenario.seed, spec.id)
        self.table = RoutingTable(spec.id)
        self.mac: RadioMac | None = None
        self.ports: dict[int, WiredPort] = {}
        self._triggered_armed = False

    # --- IP layer ---------------------------------------------------------

    def originate(self, packet: Packet, first_hop: int | None = None) -> None:
        stats = self.sim.stats
        stats.record(self.id, LayerEvent.IP_OUT_REQUEST)
        stats.record(self.id, LayerEvent.UDP_FROM_APP)
        hop = first_hop if first_hop is not None else self._route(packet)
        if hop is None:
            logger.debug("node %s: no route for %s", self.id, packet)
            return
        self._transmit(packet, hop)

    def _route(self, packet: Packet) -> int | None:
        if packet.dst == BROADCAST:
            return BROADCAST
        if packet.via == self.id:
            return packet.dst
        return self.table.next_hop(packet.via if packet.via is not None else packet.dst)

    def _transmit(self, packet: Packet, hop: int) -> None:
        frame = Frame(
            src=self.id,
            dst=hop,
            kind=packet.kind,
            payload_size=packet.size,
            created_at=self.sim.engine.now,
            packet=packet,
        )
        if hop != BROADCAST and hop in self.ports:
            self.ports[hop].enqueue(frame)
        elif self.mac is not None:
            self.mac.enqueue(frame)

    def receive(self, packet: Packet, from_node: int) -> None:
        packet = dataclasses.replace(packet)
        self.sim.stats.record(self.id, LayerEvent.IP_IN_RECEIVE)
        if packet.dst in (self.id, BROADCAST):
            self._deliver(packet, from_node)
            return
        if packet.ttl <= 1:
            return
        packet.ttl -= 1
        hop = self._route(packet)
        if packet.via == self.id:
            packet.via = None
        if hop is not None:
            self._transmit(packet, hop)

    def _deliver(self, packet: Packet, from_node: int) -> None:
        stats = self.sim.stats
        stats.record(self.id, LayerEvent.IP_IN_DELIVER, ttl=packet.ttl)
        stats.record(self.id, LayerEvent.UDP_TO_APP)
        match packet.kind:
            case FrameKind.ROUTING_UPDATE:
                stats.record(self.id, LayerEvent.BELLMAN_FORD_UPDATE)
                if self.table.process_update(from_node, packet.payload, self.sim.engine.now):
                    self.arm_triggered()
            case FrameKind.DATA if self.kind == "msc":
                self.sim.msc_answer(self, packet)
            case FrameKind.HANDOFF_SIGNALING if self.kind == "msc":
                self.sim.registry[packet.src] = packet.payload

    # --- routing ----------------------------------------------------------

    def advertise(self, entries: list[tuple[int, int]]) -> None:
        if self.mac is not None:
            self.originate(
                Packet(self.id, BROADCAST, FrameKind.ROUTING_UPDATE, _rip_size(len(entries)), ROUTING_TTL, entries),
                BROADCAST,
            )
        split = self.sim.scenario.routing.split_horizon
        for neighbor in sorted(self.ports):
            own = [
                (d, m)
                for d, m in entries
                if not (split and d != self.id and self.table[d].next_hop == neighbor)
            ]
            if own:
                self.originate(
                    Packet(self.id, neighbor, FrameKind.ROUTING_UPDATE, _rip_size(len(own)), ROUTING_TTL, own),
                    neighbor,
                )

    def periodic(self) -> None:
        routing = self.sim.scenario.routing
        interval = seconds_to_us(routing.advertisement_interval)
        if self.table.expire(self.sim.engine.now, routing.route_timeout_factor * interval):
            self.arm_triggered()
        self.advertise(self.table.periodic_advertisement())
        self.sim.engine.schedule_in(interval, EventKind.ROUTING_PERIODIC, self.periodic)

    def arm_triggered(self) -> None:
        if self._triggered_armed:
            return
        self._triggered_armed = True
        delay = triggered_delay_us(self.rng, self.sim.scenario.mac.slot_us)
        self.sim.engine.schedule_in(delay, EventKind.ROUTING_TRIGGERED, self._fire_triggered)

    def _fire_triggered(self) -> None:
        self._triggered_armed = False
        entries = self.table.emit_triggered()
        if entries:
            self.advertise(entries)


def _rip_size(entries: int) -> int:
    return IP_UDP_HEADER_BYTES + 4 + 20 * entries


class MobileCall:
    """Handoff state and call bookkeeping for one mobile station."""

    def __init__(self, node: NetworkNode) -> None:
        self.node = node
        self.state: HandoffState = Unattached(0)

    @property
    def serving(self) -> int | None:
        anchors = anchors_of(self.state)
        return anchors[0] if anchors else None


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        record_trace: bool = False,
        on_snapshot: Callable[[float, dict[int, LayerStats]], None] | None = None,
    ) -> None:
        self.scenario = scenario
        self.engine = Engine(record_trace=record_trace)
        self.on_snapshot = on_snapshot
        active = [n for n in scenario.nodes if scenario.wap_enabled or n.kind != "wap"]
        self.specs = {n.id: n for n in active}
        self.stats = StatsRegistry(sorted(self.specs))
        self.positions = {n.id: n.mobility.position_at(0.0) for n in active}
        self.nodes = {n.id: NetworkNode(self, n) for n in active}
        self.registry: dict[int, int] = {}
        self.calls = {i: MobileCall(self.nodes[i]) for i in sorted(self.specs) if self.specs[i].kind == "mobile_station"}
        self.handoff_log: list[HandoffRecord] = []
        self.attachments: list[tuple[float, int]] = []
        self.drops = 0
        self.violations: list[str] = []

        wireless = {i: n.radio for i, n in self.specs.items() if n.radio is not None}
        self.channel = Channel(
            wireless, self.positions.__getitem__, {i: self.nodes[i].rng for i in wireless}, self.stats
        )
        self.channel.on_receive = self._radio_receive
        for i in sorted(wireless):
            self.nodes[i].mac = RadioMac(i, self.engine, self.channel, self.nodes[i].rng, scenario.mac, self.stats)
        delay = seconds_to_us(scenario.wired.delay)
        for a, b in scenario.wired_links:
            if a in self.nodes and b in self.nodes:
                for src, dst in ((a, b), (b, a)):
                    self.nodes[src].ports[dst] = WiredPort(
                        self.engine, src, dst, scenario.wired.rate_mbps, delay, self.stats, self._wired_receive
                    )

    # --- delivery callbacks -----------------------------------------------

    def _radio_receive(self, node: int, frame: Frame) -> None:
        self.nodes[node].receive(frame.packet, frame.src)

    def _wired_receive(self, node: int, frame: Frame) -> None:
        self.nodes[node].receive(frame.packet, frame.src)

    # --- scheduling -------------------------------------------------------

    def _schedule_periodic(self, interval_us: int, kind: EventKind, handler: Callable[[], None]) -> None:
        def fire() -> None:
            handler()
            self.engine.schedule_in(interval_us, kind, fire)

        self.engine.schedule(interval_us, kind, fire)

    def _start(self) -> None:
        sc = self.scenario
        interval = seconds_to_us(sc.routing.advertisement_interval)
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            jitter = node.rng.randint(1, max(1, min(interval, 100_000)))
            self.engine.schedule(jitter, EventKind.ROUTING_PERIODIC, node.periodic)
        if self.calls:
            self._schedule_periodic(seconds_to_us(sc.mobility_tick), EventKind.MOBILITY_TICK, self._mobility_tick)
        self._schedule_periodic(seconds_to_us(sc.handoff.scan_interval), EventKind.SCAN_TIMER, self._scan)
        self._schedule_periodic(seconds_to_us(sc.traffic.voice_interval), EventKind.TRAFFIC_GENERATION, self._voice)
        self._schedule_periodic(seconds_to_us(sc.stats_interval), EventKind.STATS_SAMPLE, self._sample)

    def _mobility_tick(self) -> None:
        t = us_to_seconds(self.engine.now)
        for node_id, spec in self.specs.items():
            if spec.kind == "mobile_station":
                self.positions[node_id] = spec.mobility.position_at(t)

    def _sample(self) -> None:
        snapshot = self.stats.snapshot()
        t = us_to_seconds(self.engine.now)
        for v in check_invariants(snapshot):
            self.violations.append(f"t={t:g}s: {v}")
        if self.on_snapshot is not None:
            self.on_snapshot(t, snapshot)

    # --- handoff ----------------------------------------------------------

    def transmitters(self) -> list[tuple[int, Any, tuple[float, float]]]:
        return [
            (i, s.radio, self.positions[i])
            for i, s in sorted(self.specs.items())
            if s.kind in ("base_station", "wap")
        ]

    def _scan(self) -> None:
        cfg = self.scenario.handoff
        now_s = us_to_seconds(self.engine.now)
        for ms_id, call in self.calls.items():
            if isinstance(call.state, Dropped):
                continue
            here = self.positions[ms_id]
            candidates = scan_candidates(here, self.transmitters(), cfg.candidate_threshold, now_s)
            anchor_rssi = None
            anchors = anchors_of(call.state)
            if anchors:
                anchor = anchors[-1] if isinstance(call.state, SoftHandoff) else anchors[0]
                power = received_power_dbm(self.specs[anchor].radio, max(distance(here, self.positions[anchor]), 1e-3))
                if power >= self.specs[ms_id].radio.lock_threshold:
                    anchor_rssi = power
            previous = call.state
            call.state, actions = step(previous, anchor_rssi, candidates, cfg, now_s)
            self._apply(call, previous, actions, now_s)

    def _apply(self, call: MobileCall, previous: HandoffState, actions: Iterable, now_s: float) -> None:
        ms = call.node
        detached = None
        for action in actions:
            match action:
                case DetachFrom(node):
                    detached = node
                case AttachTo(node):
                    self.attachments.append((now_s, node))
                    ms.originate(
                        Packet(
                            ms.id,
                            self.scenario.msc,
                            FrameKind.HANDOFF_SIGNALING,
                            IP_UDP_HEADER_BYTES + self.scenario.traffic.signaling_payload_bytes,
                            DATA_TTL,
                            payload=node,
                        ),
                        node,
                    )
                    if isinstance(previous, Unattached):
                        kind, origin = "attach", None
                    elif isinstance(call.state, SoftHandoff):
                        kind, origin = "soft", call.state.old
                        self.stats.record(ms.id, LayerEvent.HANDOFF_SOFT)
                    else:
                        kind, origin = "hard", detached
                        self.stats.record(ms.id, LayerEvent.HANDOFF_HARD)
                    self.handoff_log.append(HandoffRecord(now_s, origin, node, kind))
                case DeclareDrop():
                    self.drops += 1
                    self.stats.record(ms.id, LayerEvent.CALL_DROPPED)
                    last = previous.anchor if isinstance(previous, Scanning) else None
                    self.handoff_log.append(HandoffRecord(now_s, last, None, "drop"))

    # --- call traffic -----------------------------------------------------

    def _voice(self) -> None:
        traffic = self.scenario.traffic
        for ms_id, call in self.calls.items():
            serving = call.serving
            if serving is None:
                continue
            ms = call.node
            anchor = self.specs[serving]
            d = max(distance(self.positions[ms_id], self.positions[serving]), 1e-3)
            radio = self.specs[ms_id].radio
            required_dbm = anchor.radio.lock_threshold + path_loss_db(d, radio.frequency, radio.path_loss_exponent)
            self.stats.record(ms_id, LayerEvent.PHY_REQUIRED_TX, amount=10 ** (required_dbm / 10))
            ms.originate(
                Packet(ms_id, self.scenario.msc, FrameKind.DATA, IP_UDP_HEADER_BYTES + traffic.voice_payload_bytes, DATA_TTL),
                serving,
            )

    def msc_answer(self, msc: NetworkNode, uplink: Packet) -> None:
        anchor = self.registry.get(uplink.src)
        if anchor is None:
            return
        msc.originate(
            Packet(msc.id, uplink.src, FrameKind.DATA, uplink.size, DATA_TTL, via=anchor)
        )

    # --- run ---------------------------------------------------------------

    def run(self) -> RunOutput:
        self._start()
        processed = self.engine.run_until(seconds_to_us(self.scenario.duration))
        snapshot = self.stats.snapshot()
        self.violations.extend(f"final: {v}" for v in check_invariants(snapshot))
        sc = self.scenario
        return RunOutput(
            scenario_name=sc.name,
            fingerprint=sc.fingerprint(),
            seed=sc.seed,
            wap_enabled=sc.wap_enabled,
            duration=sc.duration,
            stats=snapshot,
            kinds={i: s.kind for i, s in self.specs.items()},
            handoff_log=list(self.handoff_log),
            attachments=list(self.attachments),
            drops=self.drops,
            invariant_violations=list(self.violations),
            events_processed=processed,
        )


def run(scenario: Scenario, **kwargs: Any) -> RunOutput:
    return Simulation(scenario, **kwargs).run()


def run_pair(scenario: Scenario) -> tuple[RunOutput, RunOutput]:
    """Run the with-WAP and without-WAP arms of one scenario."""
    return (
        run(scenario.with_overrides(wap_enabled=True)),
        run(scenario.with_overrides(wap_enabled=False)),
    )


def compare(
    with_wap: RunOutput,
    without_wap: RunOutput,
    table: Iterable[ParameterPolarity],
    epsilon: float = DEFAULT_EPSILON,
    floor: float = DEFAULT_FLOOR,
) -> ComparisonReport:
    if with_wap.fingerprint != without_wap.fingerprint:
        raise ComparisonMismatchError(
            f"scenario fingerprints differ: {with_wap.fingerprint[:12]} vs {without_wap.fingerprint[:12]}"
        )
    table = list(table)
    values = {
        p.name: (
            metric_value(without_wap.stats, without_wap.kinds, p.scope, p.metric, without_wap.duration),
            metric_value(with_wap.stats, with_wap.kinds, p.scope, p.metric, with_wap.duration),
        )
        for p in table
    }
    return compare_values(values, table, epsilon, floor)
