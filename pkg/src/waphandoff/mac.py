"""Simplified 802.11 DCF broadcast MAC, shared radio channel, and wired links.

The radio MAC is CSMA/CA without RTS/CTS or acknowledgements: a node with a
queued frame draws a backoff from its contention window, counts it down while
the medium is idle (pausing whenever a transmission it can sense is on air),
then transmits. Receivers lose a frame when another transmission they can
sense overlaps it in time.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .engine import Engine, EventKind
from .radio import Outcome, RadioProfile, distance, received_power_dbm, reception_outcome
from .stats import LayerEvent, StatsRegistry

BROADCAST = -1

Position = tuple[float, float]


class FrameKind(enum.Enum):
    ROUTING_UPDATE = "routing-update"
    DATA = "data"
    HANDOFF_SIGNALING = "handoff-signaling"


@dataclass
class Frame:
    src: int
    dst: int
    kind: FrameKind
    payload_size: int  # bytes
    created_at: int = 0  # µs
    packet: Any = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.payload_size <= 0:
            raise ValueError("payload_size must be positive")

    @property
    def is_broadcast(self) -> bool:
        return self.dst == BROADCAST


@dataclass(frozen=True)
class MacConfig:
    slot_us: int = 20
    difs_us: int = 50
    cw_min: int = 16
    cw_max: int = 1024
    rate_mbps: float = 1.0
    plcp_us: int = 192
    header_bytes: int = 28

    def __post_init__(self) -> None:
        if not 1 <= self.cw_min <= self.cw_max:
            raise ValueError("need 1 <= cw_min <= cw_max")
        if self.slot_us <= 0 or self.rate_mbps <= 0:
            raise ValueError("slot time and rate must be positive")


@dataclass
class MacState:
    contention_window: int = 16
    backoff_remaining: int = 0
    busy_until: int = 0  # µs
    cw_min: int = 16
    cw_max: int = 1024

    def __post_init__(self) -> None:
        if not self.cw_min <= self.contention_window <= self.cw_max:
            raise ValueError("contention_window outside [cw_min, cw_max]")
        if self.backoff_remaining < 0:
            raise ValueError("backoff_remaining must be non-negative")


class TransmitWhileBusyError(RuntimeError):
    """Raised when a node starts a transmission while its previous one is on air."""


def contend(state: MacState, rng: random.Random) -> int:
    """Draw a backoff uniformly from ``[0, contention_window)`` slots."""
    slots = rng.randrange(state.contention_window)
    state.backoff_remaining = slots
    return slots


def airtime_us(payload_size: int, config: MacConfig) -> int:
    bits = (payload_size + config.header_bytes) * 8
    return config.plcp_us + math.ceil(bits / config.rate_mbps)


def link_utilization(busy_time: float, total_time: float) -> float:
    if total_time <= 0:
        raise ValueError("total_time must be positive")
    if not 0 <= busy_time <= total_time:
        raise ValueError("busy_time must lie in [0, total_time]")
    return busy_time / total_time


@dataclass
class Transmission:
    frame: Frame
    start: int
    end: int
    rx_power: dict[int, float]
    sensed_by: tuple[int, ...]

    def overlaps(self, other: "Transmission") -> bool:
        return self.start < other.end and other.start < self.end


class Channel:
    """Shared medium: computes per-receiver outcomes, collisions and carrier sense."""

    def __init__(
        self,
        profiles: Mapping[int, RadioProfile],
        position_of: Callable[[int], Position],
        rngs: Mapping[int, random.Random],
        stats: StatsRegistry | None = None,
    ) -> None:
        self.profiles = dict(profiles)
        self.position_of = position_of
        self.rngs = rngs
        self.stats = stats
        self.listeners: dict[int, "RadioMac"] = {}
        self.on_receive: Callable[[int, Frame], None] | None = None
        self._active: dict[int, Transmission] = {}
        self._history: list[Transmission] = []

    def is_transmitting(self, node: int) -> bool:
        return node in self._active

    def start(self, frame: Frame, start: int, end: int) -> Transmission:
        if frame.src in self._active:
            raise TransmitWhileBusyError(f"node {frame.src} is already transmitting")
        sender = self.profiles[frame.src]
        here = self.position_of(frame.src)
        rx_power = {}
        for node in sorted(self.profiles):
            if node == frame.src:
                continue
            d = max(distance(here, self.position_of(node)), 1e-3)
            rx_power[node] = received_power_dbm(sender, d)
        sensed = tuple(n for n, p in rx_power.items() if p >= self.profiles[n].sensitivity)
        tx = Transmission(frame, start, end, rx_power, sensed)
        self._active[frame.src] = tx
        self._history.append(tx)
        for node in sensed:
            if node in self.listeners:
                self.listeners[node].on_medium_busy()
        return tx

    def _collided(self, tx: Transmission, receiver: int) -> bool:
        floor = self.profiles[receiver].sensitivity
        return any(
            other is not tx and other.overlaps(tx) and other.rx_power.get(receiver, -math.inf) >= floor
            for other in self._history
        )

    def _was_transmitting(self, tx: Transmission, receiver: int) -> bool:
        return any(other.frame.src == receiver and other.overlaps(tx) for other in self._history)

    def finish(self, tx: Transmission) -> dict[int, Outcome]:
        """End ``tx``; return the outcome at every other node and hand frames up."""
        outcomes: dict[int, Outcome] = {}
        for node, power in tx.rx_power.items():
            profile = self.profiles[node]
            if power < profile.sensitivity or self._was_transmitting(tx, node):
                outcomes[node] = Outcome.NOT_DETECTED
                continue
            outcome = reception_outcome(power, profile, self.rngs[node].random())
            if outcome is Outcome.DELIVERED_TO_MAC and self._collided(tx, node):
                outcome = Outcome.LOCKED_WITH_ERROR
            outcomes[node] = outcome
        del self._active[tx.frame.src]
        self._prune()
        for node in tx.sensed_by:
            if node in self.listeners:
                self.listeners[node].on_medium_idle()
        for node, outcome in outcomes.items():
            self._account(node, tx.frame, outcome)
        return outcomes

    def _account(self, node: int, frame: Frame, outcome: Outcome) -> None:
        if outcome is Outcome.NOT_DETECTED:
            return
        if outcome is Outcome.LOCKED_WITH_ERROR:
            if self.stats is not None:
                self.stats.record(node, LayerEvent.PHY_LOCKED_WITH_ERROR)
            return
        if self.stats is not None:
            self.stats.record(node, LayerEvent.PHY_DELIVERED_TO_MAC)
        if frame.is_broadcast:
            if self.stats is not None:
                self.stats.record(node, LayerEvent.MAC_BROADCAST_RECEIVED)
        elif frame.dst == node:
            if self.stats is not None:
                self.stats.record(node, LayerEvent.LINK_FRAME_RECEIVED)
        else:
            return  # overheard unicast, discarded by the MAC
        if self.on_receive is not None:
            self.on_receive(node, frame)

    def _prune(self) -> None:
        if not self._active:
            horizon = math.inf
        else:
            horizon = min(t.start for t in self._active.values())
        self._history = [t for t in self._history if t.end > horizon or t.frame.src in self._active]


def transmit_broadcast(
    frame: Frame,
    positions: Mapping[int, Position],
    profiles: Mapping[int, RadioProfile],
    rngs: Mapping[int, random.Random],
    duration_us: int,
    stats: StatsRegistry | None = None,
) -> dict[int, Outcome]:
    """One isolated transmission on an otherwise idle channel."""
    channel = Channel(profiles, positions.__getitem__, rngs, stats)
    tx = channel.start(frame, frame.created_at, frame.created_at + duration_us)
    return channel.finish(tx)


class RadioMac:
    """Per-node DCF access with pause/resume backoff."""

    def __init__(
        self,
        node_id: int,
        engine: Engine,
        channel: Channel,
        rng: random.Random,
        config: MacConfig,
        stats: StatsRegistry,
    ) -> None:
        self.node_id = node_id
        self.engine = engine
        self.channel = channel
        self.rng = rng
        self.config = config
        self.stats = stats
        self.state = MacState(config.cw_min, cw_min=config.cw_min, cw_max=config.cw_max)
        self.queue: deque[Frame] = deque()
        self.mode = "idle"  # idle | defer | backoff | tx
        self.sensed = 0
        self._countdown_event: int | None = None
        self._countdown_start = 0
        self._tx_at = -1
        channel.listeners[node_id] = self

    def enqueue(self, frame: Frame) -> None:
        self.queue.append(frame)
        self.stats.record(
            self.node_id, LayerEvent.ENQUEUE, size=frame.payload_size, depth=len(self.queue)
        )
        if self.mode == "idle":
            self._access()

    def _access(self) -> None:
        contend(self.state, self.rng)
        if self.sensed:
            self.mode = "defer"
        else:
            self._start_countdown()

    def _start_countdown(self) -> None:
        cfg = self.config
        self.mode = "backoff"
        self._countdown_start = self.engine.now
        self._tx_at = self.engine.now + cfg.difs_us + self.state.backoff_remaining * cfg.slot_us
        self._countdown_event = self.engine.schedule(
            self._tx_at, EventKind.TRANSMISSION_START, self._transmit
        )

    def on_medium_busy(self) -> None:
        self.sensed += 1
        # a transmission starting in our own slot cannot be sensed in time
        if self.mode != "backoff" or self._tx_at == self.engine.now:
            return
        self.engine.cancel(self._countdown_event)
        elapsed = self.engine.now - self._countdown_start - self.config.difs_us
        if elapsed > 0:
            done = min(self.state.backoff_remaining, elapsed // self.config.slot_us)
            self.state.backoff_remaining -= done
        self.mode = "defer"

    def on_medium_idle(self) -> None:
        self.sensed -= 1
        if self.sensed == 0 and self.mode == "defer":
            self._start_countdown()

    def _transmit(self) -> None:
        frame = self.queue.popleft()
        self.stats.record(self.node_id, LayerEvent.DEQUEUE)
        now = self.engine.now
        duration = airtime_us(frame.payload_size, self.config)
        tx = self.channel.start(frame, now, now + duration)
        self.mode = "tx"
        self.state.busy_until = now + duration
        self.state.backoff_remaining = 0
        self.stats.record(self.node_id, LayerEvent.LINK_BUSY, amount=duration)
        if frame.is_broadcast:
            self.stats.record(self.node_id, LayerEvent.MAC_BROADCAST_SENT)
        else:
            self.stats.record(self.node_id, LayerEvent.LINK_FRAME_SENT)
        self.engine.schedule(now + duration, EventKind.TRANSMISSION_END, self._end, tx)

    def _end(self, tx: Transmission) -> None:
        self.mode = "idle"
        self.channel.finish(tx)
        if self.queue and self.mode == "idle":
            self._access()


class WiredPort:
    """One direction of a point-to-point wired link with a FIFO queue."""

    def __init__(
        self,
        engine: Engine,
        src: int,
        dst: int,
        rate_mbps: float,
        delay_us: int,
        stats: StatsRegistry,
        deliver: Callable[[int, Frame], None],
    ) -> None:
        self.engine = engine
        self.src = src
        self.dst = dst
        self.rate_mbps = rate_mbps
        self.delay_us = delay_us
        self.stats = stats
        self.deliver = deliver
        self.queue: deque[Frame] = deque()
        self.busy = False

    def enqueue(self, frame: Frame) -> None:
        self.queue.append(frame)
        self.stats.record(self.src, LayerEvent.ENQUEUE, size=frame.payload_size, depth=len(self.queue))
        if not self.busy:
            self._send_next()

    def _send_next(self) -> None:
        frame = self.queue.popleft()
        self.stats.record(self.src, LayerEvent.DEQUEUE)
        duration = max(1, math.ceil(frame.payload_size * 8 / self.rate_mbps))
        self.stats.record(self.src, LayerEvent.LINK_FRAME_SENT)
        self.stats.record(self.src, LayerEvent.LINK_BUSY, amount=duration)
        self.busy = True
        self.engine.schedule_in(duration, EventKind.TRANSMISSION_END, self._done, frame)

    def _done(self, frame: Frame) -> None:
        self.engine.schedule_in(self.delay_us, EventKind.RECEPTION_COMPLETE, self._arrive, frame)
        self.busy = False
        if self.queue:
            self._send_next()

    def _arrive(self, frame: Frame) -> None:
        self.stats.record(self.dst, LayerEvent.LINK_FRAME_RECEIVED)
        self.deliver(self.dst, frame)
