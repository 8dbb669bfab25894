"""Deterministic discrete-event scheduler.

Virtual time is an integer number of microseconds. Events are ordered by
``(fire_time, seq)`` where ``seq`` is a per-engine insertion counter, so two
runs that schedule the same events in the same order process them in the
same order.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

US_PER_SECOND = 1_000_000


def seconds_to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_SECOND))


def us_to_seconds(us: int) -> float:
    return us / US_PER_SECOND


class EventKind(enum.Enum):
    TRANSMISSION_START = "transmission-start"
    TRANSMISSION_END = "transmission-end"
    RECEPTION_COMPLETE = "reception-complete"
    SCAN_TIMER = "scan-timer"
    ROUTING_PERIODIC = "routing-periodic"
    ROUTING_TRIGGERED = "routing-triggered"
    MOBILITY_TICK = "mobility-tick"
    TRAFFIC_GENERATION = "traffic-generation"
    STATS_SAMPLE = "stats-sample"


class ScheduleInPastError(ValueError):
    """Raised when an event is scheduled before the current virtual time."""


@dataclass(order=True)
class Event:
    fire_time: int
    seq: int
    kind: EventKind = field(compare=False)
    handler: Callable[..., Any] = field(compare=False, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)


class Engine:
    """Single-threaded event loop over a binary heap."""

    def __init__(self, record_trace: bool = False) -> None:
        self.now = 0
        self._heap: list[Event] = []
        self._seq = 0
        self._pending: set[int] = set()
        self.trace: list[tuple[int, int, str]] | None = [] if record_trace else None

    def schedule(
        self, at: int, kind: EventKind, handler: Callable[..., Any], *args: Any
    ) -> int:
        """Queue ``handler(*args)`` to run at virtual time ``at`` (µs).

        Returns the event id, usable with :meth:`cancel`.
        """
        if at < self.now:
            raise ScheduleInPastError(
                f"cannot schedule {kind.value} at {at} us; clock is at {self.now} us"
            )
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, Event(int(at), seq, kind, handler, args))
        self._pending.add(seq)
        return seq

    def schedule_in(
        self, delay: int, kind: EventKind, handler: Callable[..., Any], *args: Any
    ) -> int:
        return self.schedule(self.now + delay, kind, handler, *args)

    def cancel(self, event_id: int) -> bool:
        # lazy deletion: the heap entry is skipped when popped
        if event_id in self._pending:
            self._pending.discard(event_id)
            return True
        return False

    def is_pending(self, event_id: int) -> bool:
        return event_id in self._pending

    def run_until(self, t_end: int) -> int:
        """Process every event with ``fire_time <= t_end``; leave the clock at ``t_end``."""
        if t_end < self.now:
            raise ScheduleInPastError(f"run_until({t_end}) is before now={self.now}")
        processed = 0
        heap = self._heap
        while heap and heap[0].fire_time <= t_end:
            event = heapq.heappop(heap)
            if event.seq not in self._pending:
                continue
            self._pending.discard(event.seq)
            self.now = event.fire_time
            if self.trace is not None:
                self.trace.append((event.fire_time, event.seq, event.kind.value))
            event.handler(*event.args)
            processed += 1
        self.now = t_end
        return processed

    @property
    def pending_count(self) -> int:
        return len(self._pending)


def node_rng(run_seed: int, node_id: int) -> random.Random:
    """Independent random stream for one node.

    Derived from a hash of ``(run_seed, node_id)`` so adding or removing a
    node never shifts another node's draws.
    """
    digest = hashlib.sha256(f"{run_seed}:{node_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))
