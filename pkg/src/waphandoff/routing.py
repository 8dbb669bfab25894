"""Distance-vector (Bellman-Ford) routing with periodic and triggered updates.

Metrics are hop counts with RIP's infinity of 16. A node advertises its full
table every advertisement interval and, when an entry changes, sends a
triggered update carrying only the changed entries.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable

from .engine import Engine, EventKind, node_rng

INFINITY = 16
UNREACHABLE = None


@dataclass
class RouteEntry:
    destination: int
    metric: int
    next_hop: int
    last_refreshed: int = 0  # µs


class RoutingTable:
    def __init__(self, owner: int) -> None:
        self.owner = owner
        self.entries: dict[int, RouteEntry] = {owner: RouteEntry(owner, 0, owner)}
        self.pending_triggered: set[int] = set()

    def __contains__(self, destination: int) -> bool:
        return destination in self.entries

    def __getitem__(self, destination: int) -> RouteEntry:
        return self.entries[destination]

    def metric(self, destination: int) -> int:
        entry = self.entries.get(destination)
        return INFINITY if entry is None else entry.metric

    def process_update(
        self, sender: int, advertised: Iterable[tuple[int, int]], now: int = 0
    ) -> set[int]:
        """Merge a neighbor's advertisement; return the destinations that changed."""
        changed = set()
        for destination, metric in advertised:
            if destination == self.owner:
                continue
            candidate = min(min(metric, INFINITY) + 1, INFINITY)
            current = self.entries.get(destination)
            if current is None:
                if candidate >= INFINITY:
                    continue
                self.entries[destination] = RouteEntry(destination, candidate, sender, now)
                changed.add(destination)
            elif candidate < current.metric or (
                current.next_hop == sender and candidate != current.metric
            ):
                current.metric = candidate
                current.next_hop = sender
                current.last_refreshed = now
                changed.add(destination)
            elif current.next_hop == sender:
                current.last_refreshed = now
        self.pending_triggered |= changed
        return changed

    def periodic_advertisement(
        self, to: int | None = None, split_horizon: bool = False
    ) -> list[tuple[int, int]]:
        """Full table dump; with split horizon, omit routes learned from ``to``."""
        return [
            (d, e.metric)
            for d, e in sorted(self.entries.items())
            if not (split_horizon and to is not None and e.next_hop == to and d != self.owner)
        ]

    def emit_triggered(self) -> list[tuple[int, int]]:
        entries = [(d, self.entries[d].metric) for d in sorted(self.pending_triggered)]
        self.pending_triggered.clear()
        return entries

    def next_hop(self, destination: int) -> int | None:
        entry = self.entries.get(destination)
        if entry is None or entry.metric >= INFINITY:
            return UNREACHABLE
        return entry.next_hop

    def invalidate_via(self, neighbor: int, now: int = 0) -> set[int]:
        """Poison every route whose next hop is ``neighbor`` (link down)."""
        changed = set()
        for d, e in self.entries.items():
            if d != self.owner and e.next_hop == neighbor and e.metric < INFINITY:
                e.metric = INFINITY
                e.last_refreshed = now
                changed.add(d)
        self.pending_triggered |= changed
        return changed

    def expire(self, now: int, timeout: int) -> set[int]:
        """Poison routes not refreshed within ``timeout`` µs."""
        changed = set()
        for d, e in self.entries.items():
            if d != self.owner and e.metric < INFINITY and now - e.last_refreshed > timeout:
                e.metric = INFINITY
                changed.add(d)
        self.pending_triggered |= changed
        return changed


def triggered_delay_us(rng: random.Random, slot_us: int = 20) -> int:
    """Randomized 1-5 slot hold-off before a triggered update goes out."""
    return rng.randint(1, 5) * slot_us


class DistanceVectorNetwork:
    """Distance-vector nodes over ideal point-to-point links.

    Used to exercise the routing logic on arbitrary graphs, independent of
    the radio and scenario machinery.
    """

    def __init__(
        self,
        engine: Engine | None = None,
        link_delay_us: int = 1000,
        advertisement_interval_us: int = 1_000_000,
        seed: int = 0,
        slot_us: int = 20,
        split_horizon: bool = False,
    ) -> None:
        self.engine = engine or Engine()
        self.link_delay_us = link_delay_us
        self.interval = advertisement_interval_us
        self.seed = seed
        self.slot_us = slot_us
        self.split_horizon = split_horizon
        self.tables: dict[int, RoutingTable] = {}
        self.links: dict[int, set[int]] = {}
        self._rngs: dict[int, random.Random] = {}
        self._triggered_armed: set[int] = set()
        self.updates_delivered: dict[int, int] = {}
        self.on_change: Callable[[int, int, set[int]], None] | None = None

    def add_node(self, node: int) -> None:
        self.tables[node] = RoutingTable(node)
        self.links[node] = set()
        self._rngs[node] = node_rng(self.seed, node)
        self.updates_delivered[node] = 0

    def start(self) -> None:
        for node in sorted(self.tables):
            jitter = self._rngs[node].randint(1, max(1, self.interval // 10))
            self.engine.schedule_in(jitter, EventKind.ROUTING_PERIODIC, self._periodic, node)

    def add_link(self, a: int, b: int) -> None:
        for n in (a, b):
            if n not in self.tables:
                self.add_node(n)
        self.links[a].add(b)
        self.links[b].add(a)
        # exchange full tables on link-up
        self._send(a, b, self.tables[a].periodic_advertisement(b, self.split_horizon))
        self._send(b, a, self.tables[b].periodic_advertisement(a, self.split_horizon))

    def remove_link(self, a: int, b: int) -> None:
        self.links[a].discard(b)
        self.links[b].discard(a)
        for here, gone in ((a, b), (b, a)):
            if self.tables[here].invalidate_via(gone, self.engine.now):
                self._arm_triggered(here)

    def _send(self, src: int, dst: int, entries: list[tuple[int, int]]) -> None:
        self.engine.schedule_in(
            self.link_delay_us, EventKind.RECEPTION_COMPLETE, self._receive, src, dst, entries
        )

    def _receive(self, src: int, dst: int, entries: list[tuple[int, int]]) -> None:
        if src not in self.links[dst]:
            return  # link went down while the update was in flight
        self.updates_delivered[dst] += 1
        changed = self.tables[dst].process_update(src, entries, self.engine.now)
        if changed:
            if self.on_change is not None:
                self.on_change(dst, self.engine.now, changed)
            self._arm_triggered(dst)

    def _arm_triggered(self, node: int) -> None:
        if node in self._triggered_armed:
            return
        self._triggered_armed.add(node)
        delay = triggered_delay_us(self._rngs[node], self.slot_us)
        self.engine.schedule_in(delay, EventKind.ROUTING_TRIGGERED, self._triggered, node)

    def _triggered(self, node: int) -> None:
        self._triggered_armed.discard(node)
        table = self.tables[node]
        if not table.pending_triggered:
            return
        changed = {d for d in table.pending_triggered}
        for neighbor in sorted(self.links[node]):
            entries = [
                (d, table[d].metric)
                for d in sorted(changed)
                if not (self.split_horizon and table[d].next_hop == neighbor)
            ]
            if entries:
                self._send(node, neighbor, entries)
        table.emit_triggered()

    def _periodic(self, node: int) -> None:
        table = self.tables[node]
        if table.expire(self.engine.now, 6 * self.interval):
            self._arm_triggered(node)
        for neighbor in sorted(self.links[node]):
            self._send(node, neighbor, table.periodic_advertisement(neighbor, self.split_horizon))
        self.engine.schedule_in(self.interval, EventKind.ROUTING_PERIODIC, self._periodic, node)

    def run_for(self, duration_us: int) -> int:
        return self.engine.run_until(self.engine.now + duration_us)
