"""Per-layer counters, invariant checks, and the with/without comparison."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

DEFAULT_EPSILON = 0.10
DEFAULT_FLOOR = 1.0


class LayerEvent(enum.Enum):
    PHY_DELIVERED_TO_MAC = "phy-delivered-to-mac"
    PHY_LOCKED_WITH_ERROR = "phy-locked-with-error"
    PHY_REQUIRED_TX = "phy-required-tx"
    MAC_BROADCAST_SENT = "mac-broadcast-sent"
    MAC_BROADCAST_RECEIVED = "mac-broadcast-received"
    LINK_FRAME_SENT = "link-frame-sent"
    LINK_FRAME_RECEIVED = "link-frame-received"
    LINK_BUSY = "link-busy"
    IP_IN_RECEIVE = "ip-in-receive"
    IP_IN_DELIVER = "ip-in-deliver"
    IP_OUT_REQUEST = "ip-out-request"
    ENQUEUE = "enqueue"
    DEQUEUE = "dequeue"
    UDP_FROM_APP = "udp-from-app"
    UDP_TO_APP = "udp-to-app"
    BELLMAN_FORD_UPDATE = "bellman-ford-update"
    CALL_DROPPED = "call-dropped"
    HANDOFF_SOFT = "handoff-soft"
    HANDOFF_HARD = "handoff-hard"


@dataclass
class LayerStats:
    phy_signals_locked: int = 0
    phy_signals_with_errors: int = 0
    phy_signals_to_mac: int = 0
    phy_required_tx_mw_sum: float = 0.0
    phy_required_tx_samples: int = 0
    mac_broadcast_sent: int = 0
    mac_broadcast_received: int = 0
    link_frames_sent: int = 0
    link_frames_received: int = 0
    link_busy_time_us: int = 0
    ip_in_receives: int = 0
    ip_in_delivers: int = 0
    ip_out_requests: int = 0
    ip_in_delivers_ttl_sum: int = 0
    queue_packets_queued: int = 0
    queue_packets_dequeued: int = 0
    queue_peak_size: int = 0
    queue_bytes_total: int = 0
    udp_from_app: int = 0
    udp_to_app: int = 0
    bellman_ford_updates_received: int = 0
    calls_dropped: int = 0
    handoffs_soft: int = 0
    handoffs_hard: int = 0

    def copy(self) -> "LayerStats":
        return LayerStats(**asdict(self))

    def items(self) -> list[tuple[str, int | float]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def parameter_names() -> list[str]:
    return [f.name for f in fields(LayerStats)]


class StatsRegistry:
    """Counter store for one simulation run, keyed by node id."""

    def __init__(self, node_ids: Iterable[int] = ()) -> None:
        self.nodes: dict[int, LayerStats] = {n: LayerStats() for n in node_ids}

    def __getitem__(self, node: int) -> LayerStats:
        return self.nodes[node]

    def record(
        self,
        node: int,
        event: LayerEvent,
        *,
        amount: int | float = 1,
        size: int = 0,
        depth: int = 0,
        ttl: int = 0,
    ) -> None:
        s = self.nodes.setdefault(node, LayerStats())
        match event:
            case LayerEvent.PHY_DELIVERED_TO_MAC:
                s.phy_signals_locked += 1
                s.phy_signals_to_mac += 1
            case LayerEvent.PHY_LOCKED_WITH_ERROR:
                s.phy_signals_locked += 1
                s.phy_signals_with_errors += 1
            case LayerEvent.PHY_REQUIRED_TX:
                s.phy_required_tx_mw_sum += amount
                s.phy_required_tx_samples += 1
            case LayerEvent.MAC_BROADCAST_SENT:
                s.mac_broadcast_sent += 1
            case LayerEvent.MAC_BROADCAST_RECEIVED:
                s.mac_broadcast_received += 1
            case LayerEvent.LINK_FRAME_SENT:
                s.link_frames_sent += 1
            case LayerEvent.LINK_FRAME_RECEIVED:
                s.link_frames_received += 1
            case LayerEvent.LINK_BUSY:
                s.link_busy_time_us += int(amount)
            case LayerEvent.IP_IN_RECEIVE:
                s.ip_in_receives += 1
            case LayerEvent.IP_IN_DELIVER:
                s.ip_in_delivers += 1
                s.ip_in_delivers_ttl_sum += ttl
            case LayerEvent.IP_OUT_REQUEST:
                s.ip_out_requests += 1
            case LayerEvent.ENQUEUE:
                s.queue_packets_queued += 1
                s.queue_bytes_total += size
                s.queue_peak_size = max(s.queue_peak_size, depth)
            case LayerEvent.DEQUEUE:
                s.queue_packets_dequeued += 1
            case LayerEvent.UDP_FROM_APP:
                s.udp_from_app += 1
            case LayerEvent.UDP_TO_APP:
                s.udp_to_app += 1
            case LayerEvent.BELLMAN_FORD_UPDATE:
                s.bellman_ford_updates_received += 1
            case LayerEvent.CALL_DROPPED:
                s.calls_dropped += 1
            case LayerEvent.HANDOFF_SOFT:
                s.handoffs_soft += 1
            case LayerEvent.HANDOFF_HARD:
                s.handoffs_hard += 1

    def snapshot(self) -> dict[int, LayerStats]:
        return {n: s.copy() for n, s in sorted(self.nodes.items())}


def check_invariants(snapshot: Mapping[int, LayerStats]) -> list[str]:
    """Return a description of every conservation law the snapshot breaks."""
    violations = []
    for node, s in sorted(snapshot.items()):
        if s.phy_signals_locked != s.phy_signals_with_errors + s.phy_signals_to_mac:
            violations.append(
                f"node {node}: phy_signals_locked {s.phy_signals_locked} != "
                f"with_errors {s.phy_signals_with_errors} + to_mac {s.phy_signals_to_mac}"
            )
        if s.queue_packets_dequeued > s.queue_packets_queued:
            violations.append(
                f"node {node}: dequeued {s.queue_packets_dequeued} > queued {s.queue_packets_queued}"
            )
        if s.ip_in_delivers > s.ip_in_receives:
            violations.append(
                f"node {node}: ip_in_delivers {s.ip_in_delivers} > ip_in_receives {s.ip_in_receives}"
            )
    sent = sum(s.link_frames_sent for s in snapshot.values())
    received = sum(s.link_frames_received for s in snapshot.values())
    if received > sent:
        violations.append(f"link frames received {received} > sent {sent}")
    broadcasts = sum(s.mac_broadcast_sent for s in snapshot.values())
    for node, s in sorted(snapshot.items()):
        others = broadcasts - s.mac_broadcast_sent
        if s.mac_broadcast_received > others:
            violations.append(
                f"node {node}: mac_broadcast_received {s.mac_broadcast_received} > "
                f"broadcasts by other nodes {others}"
            )
    return violations


def write_stats_csv(snapshot: Mapping[int, LayerStats], stream: io.TextIOBase) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["node", "parameter", "value"])
    for node, s in sorted(snapshot.items()):
        for name, value in s.items():
            writer.writerow([node, name, format_value(value)])


def format_value(value: int | float | None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, int):
        return str(value)
    return f"{value:.10g}"


# ---------------------------------------------------------------------------
# comparison


class Polarity(enum.Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    EITHER = "either"


class Classification(enum.Enum):
    IMPROVED = "Improved"
    UNDESIRABLE = "Undesirable"
    INSIGNIFICANT = "Insignificant"


class UndefinedScoreError(ValueError):
    """Raised when no parameter changed significantly in either direction."""


@dataclass(frozen=True)
class ParameterPolarity:
    """One scored parameter: how to measure it on a run and which way is better."""

    name: str
    layer: str
    desirable_direction: Polarity
    scope: str  # ms | msc | bs | wap | all
    metric: str


def classify_parameter(
    without: float,
    with_wap: float,
    polarity: ParameterPolarity | Polarity,
    epsilon: float = DEFAULT_EPSILON,
    floor: float = DEFAULT_FLOOR,
) -> Classification:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    direction = polarity.desirable_direction if isinstance(polarity, ParameterPolarity) else polarity
    if direction is Polarity.EITHER:
        return Classification.INSIGNIFICANT
    delta = with_wap - without
    if abs(delta) <= epsilon * max(abs(without), abs(with_wap), floor):
        return Classification.INSIGNIFICANT
    increased = delta > 0
    if increased == (direction is Polarity.INCREASE):
        return Classification.IMPROVED
    return Classification.UNDESIRABLE


def qos_score(classifications: Iterable[Classification]) -> float:
    """Percentage of significant changes that were improvements."""
    items = list(classifications)
    improved = items.count(Classification.IMPROVED)
    undesirable = items.count(Classification.UNDESIRABLE)
    if improved + undesirable == 0:
        raise UndefinedScoreError("no parameter changed significantly")
    return round(100.0 * improved / (improved + undesirable), 2)


@dataclass(frozen=True)
class ComparisonRow:
    parameter: ParameterPolarity
    without: float
    with_wap: float
    classification: Classification


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]

    def counts(self) -> dict[Classification, int]:
        return {c: sum(r.classification is c for r in self.rows) for c in Classification}

    def qos_score(self) -> float:
        return qos_score(r.classification for r in self.rows)

    def score_text(self) -> str:
        try:
            return f"{self.qos_score():.2f}%"
        except UndefinedScoreError:
            return "n/a"

    def write_csv(self, stream: io.TextIOBase) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["parameter", "without", "with", "classification"])
        for r in self.rows:
            writer.writerow(
                [r.parameter.name, format_value(r.without), format_value(r.with_wap), r.classification.value]
            )

    def to_text(self) -> str:
        header = ("layer", "parameter", "without", "with", "classification")
        body = [
            (
                r.parameter.layer,
                r.parameter.name,
                format_value(r.without),
                format_value(r.with_wap),
                r.classification.value,
            )
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *body]]
        counts = self.counts()
        lines.append("")
        lines.append(
            f"Improved: {counts[Classification.IMPROVED]}  "
            f"Undesirable: {counts[Classification.UNDESIRABLE]}  "
            f"Insignificant: {counts[Classification.INSIGNIFICANT]}"
        )
        lines.append(f"QoS score: {self.score_text()}")
        return "\n".join(lines) + "\n"


def compare_values(
    values: Mapping[str, tuple[float, float]],
    table: Iterable[ParameterPolarity],
    epsilon: float = DEFAULT_EPSILON,
    floor: float = DEFAULT_FLOOR,
) -> ComparisonReport:
    """Classify ``{name: (without, with)}`` pairs against the polarity table."""
    rows = []
    for p in table:
        without, with_wap = values[p.name]
        rows.append(ComparisonRow(p, without, with_wap, classify_parameter(without, with_wap, p, epsilon, floor)))
    return ComparisonReport(tuple(rows))


def _data_path(name: str) -> Path:
    return Path(str(resources.files("waphandoff") / "data" / name))


def load_polarity_table(path: str | Path | None = None) -> list[ParameterPolarity]:
    with open(path or _data_path("polarity.json"), encoding="utf-8") as fh:
        raw = json.load(fh)
    table = [
        ParameterPolarity(
            name=entry["name"],
            layer=entry["layer"],
            desirable_direction=Polarity(entry["polarity"]),
            scope=entry["scope"],
            metric=entry["metric"],
        )
        for entry in raw["parameters"]
    ]
    names = [p.name for p in table]
    if len(set(names)) != len(names):
        raise ValueError("polarity table has duplicate parameter names")
    return table


def load_published_table(path: str | Path | None = None) -> dict[str, tuple[float, float]]:
    with open(path or _data_path("published_table.json"), encoding="utf-8") as fh:
        raw = json.load(fh)
    return {name: (float(v["without"]), float(v["with"])) for name, v in raw["values"].items()}


# ---------------------------------------------------------------------------
# metric extraction from run snapshots

_SCOPES = {
    "ms": {"mobile_station"},
    "msc": {"msc"},
    "bs": {"base_station"},
    "wap": {"wap"},
    "all": {"mobile_station", "msc", "base_station", "wap"},
}


def metric_value(
    snapshot: Mapping[int, LayerStats],
    kinds: Mapping[int, str],
    scope: str,
    metric: str,
    duration_s: float,
) -> float:
    """Evaluate one comparison metric over the nodes selected by ``scope``."""
    selected = [s for n, s in snapshot.items() if kinds.get(n) in _SCOPES[scope]]
    total = lambda attr: sum(getattr(s, attr) for s in selected)  # noqa: E731
    match metric:
        case "required_tx_mw":
            samples = total("phy_required_tx_samples")
            return total("phy_required_tx_mw_sum") / samples if samples else 0.0
        case "ttl_per_delivery":
            delivers = total("ip_in_delivers")
            return total("ip_in_delivers_ttl_sum") / delivers if delivers else 0.0
        case "link_utilization":
            if duration_s <= 0 or not selected:
                return 0.0
            from .mac import link_utilization

            return link_utilization(total("link_busy_time_us") / 1e6 / len(selected), duration_s)
        case "udp_total":
            return float(total("udp_from_app") + total("udp_to_app"))
        case "mean_packet_size":
            queued = total("queue_packets_queued")
            return total("queue_bytes_total") / queued if queued else 0.0
        case "queue_peak_size":
            return float(max((s.queue_peak_size for s in selected), default=0))
        case _:
            return float(total(metric))
