"""Scenario files: schema, loading, validation and fingerprinting.

A scenario is one JSON document (``schema_version`` 1). Nodes reference named
radio profiles; the mobile station carries a mobility section instead of a
fixed position. See ``docs/scenario-schema.md`` for the full field list.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .handoff import HandoffConfig
from .mac import MacConfig
from .mobility import CircularPath, Path as MobilityPath, Static, WaypointPath
from .radio import RadioProfile

SCHEMA_VERSION = 1
NODE_KINDS = ("base_station", "wap", "msc", "mobile_station")


class ScenarioError(Exception):
    """Base class for scenario problems."""


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    def __init__(self, violations: list[str]) -> None:
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class NodeSpec:
    id: int
    kind: str
    mobility: MobilityPath
    radio: RadioProfile | None
    radio_name: str | None = None

    @property
    def is_wireless(self) -> bool:
        return self.radio is not None


@dataclass(frozen=True)
class RoutingConfig:
    advertisement_interval: float = 15.0  # s
    split_horizon: bool = False
    route_timeout_factor: int = 6


@dataclass(frozen=True)
class TrafficConfig:
    voice_interval: float = 0.2  # s
    voice_payload_bytes: int = 160
    signaling_payload_bytes: int = 48


@dataclass(frozen=True)
class WiredConfig:
    rate_mbps: float = 100.0
    delay: float = 0.0005  # s


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[NodeSpec, ...]
    wired_links: tuple[tuple[int, int], ...]
    duration: float  # s
    seed: int
    wap_enabled: bool = True
    handoff: HandoffConfig = field(default_factory=HandoffConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    wired: WiredConfig = field(default_factory=WiredConfig)
    mobility_tick: float = 0.1  # s
    stats_interval: float = 1.0  # s
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def node(self, node_id: int) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def ids_of(self, kind: str) -> list[int]:
        return sorted(n.id for n in self.nodes if n.kind == kind)

    @property
    def msc(self) -> int:
        return self.ids_of("msc")[0]

    def with_overrides(
        self, *, seed: int | None = None, duration: float | None = None, wap_enabled: bool | None = None
    ) -> "Scenario":
        changes: dict[str, Any] = {}
        source = dict(self.source)
        if seed is not None:
            changes["seed"] = seed
            source["seed"] = seed
        if duration is not None:
            changes["duration"] = duration
            source["duration_s"] = duration
        if wap_enabled is not None:
            changes["wap_enabled"] = wap_enabled
            source["wap_enabled"] = wap_enabled
        return dataclasses.replace(self, source=source, **changes)

    def fingerprint(self) -> str:
        """Hash of every scenario field except ``wap_enabled``."""
        body = {k: v for k, v in self.source.items() if k != "wap_enabled"}
        canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def canonical_scenario_path() -> Path:
    return Path(str(resources.files("waphandoff") / "data" / "canonical.json"))


def load_scenario(path: str | Path) -> Scenario:
    """Read, parse and validate a scenario file.

    Raises ``OSError`` if the file cannot be read, :class:`ScenarioParseError`
    for malformed JSON or wrongly typed fields, and
    :class:`ScenarioValidationError` when invariants fail.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(raw)


def _require(raw: dict, key: str, where: str) -> Any:
    if key not in raw:
        raise ScenarioParseError(f"{where}: missing field '{key}'")
    return raw[key]


def _point(value: Any, where: str) -> tuple[float, float]:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ScenarioParseError(f"{where}: expected [x, y]")
    return (float(value[0]), float(value[1]))


def _mobility(raw: dict, where: str) -> MobilityPath:
    if "mobility" not in raw:
        return Static(_point(_require(raw, "position", where), f"{where}.position"))
    m = raw["mobility"]
    kind = _require(m, "type", f"{where}.mobility")
    try:
        if kind == "static":
            return Static(_point(_require(m, "position", f"{where}.mobility"), f"{where}.mobility.position"))
        if kind == "circular":
            if "angular_speed" in m:
                omega = float(m["angular_speed"])
            else:
                period = float(_require(m, "period_s", f"{where}.mobility"))
                omega = (2 * math.pi / period) * (-1 if m.get("clockwise", False) else 1)
            start = m.get("start_angle", 0.0)
            if "start_angle_deg" in m:
                start = math.radians(float(m["start_angle_deg"]))
            return CircularPath(
                center=_point(_require(m, "center", f"{where}.mobility"), f"{where}.mobility.center"),
                radius=float(_require(m, "radius", f"{where}.mobility")),
                angular_speed=omega,
                start_angle=float(start),
            )
        if kind == "waypoint":
            points = tuple(
                (_point(p["position"], f"{where}.mobility.waypoints[{i}]"), float(p["time"]))
                for i, p in enumerate(_require(m, "waypoints", f"{where}.mobility"))
            )
            return WaypointPath(points)
    except ValueError as exc:
        raise ScenarioParseError(f"{where}.mobility: {exc}") from exc
    raise ScenarioParseError(f"{where}.mobility.type: unknown mobility type '{kind}'")


def _profile(raw: dict, where: str) -> RadioProfile:
    try:
        return RadioProfile(
            tx_power=float(_require(raw, "tx_power_dbm", where)),
            frequency=float(_require(raw, "frequency_mhz", where)),
            sensitivity=float(_require(raw, "sensitivity_dbm", where)),
            lock_threshold=float(_require(raw, "lock_threshold_dbm", where)),
            error_floor_margin=float(_require(raw, "error_floor_margin_db", where)),
            path_loss_exponent=float(raw.get("path_loss_exponent", 2.0)),
        )
    except ValueError as exc:
        raise ScenarioParseError(f"{where}: {exc}") from exc


def _section(cls: type, raw: dict | None, where: str, rename: dict[str, str]) -> Any:
    if raw is None:
        return cls()
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        name = rename.get(key, key)
        if name not in known:
            raise ScenarioParseError(f"{where}: unknown field '{key}'")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioParseError(f"{where}: {exc}") from exc


def scenario_from_dict(raw: Any) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioParseError("scenario: top level must be a JSON object")
    version = _require(raw, "schema_version", "scenario")
    if version != SCHEMA_VERSION:
        raise ScenarioParseError(f"schema_version: unsupported version {version!r}")

    profiles = {
        name: _profile(p, f"radio_profiles.{name}")
        for name, p in raw.get("radio_profiles", {}).items()
    }
    nodes = []
    for i, n in enumerate(_require(raw, "nodes", "scenario")):
        where = f"nodes[{i}]"
        node_id = _require(n, "id", where)
        if not isinstance(node_id, int) or isinstance(node_id, bool):
            raise ScenarioParseError(f"{where}.id: node ids must be integers")
        kind = _require(n, "kind", where)
        radio_name = n.get("radio")
        if radio_name is not None and radio_name not in profiles:
            raise ScenarioParseError(f"{where}.radio: unknown radio profile '{radio_name}'")
        nodes.append(
            NodeSpec(
                id=node_id,
                kind=kind,
                mobility=_mobility(n, where),
                radio=profiles[radio_name] if radio_name is not None else None,
                radio_name=radio_name,
            )
        )
    links = []
    for i, link in enumerate(raw.get("wired_links", [])):
        if not (isinstance(link, list) and len(link) == 2):
            raise ScenarioParseError(f"wired_links[{i}]: expected [node_id, node_id]")
        links.append((int(link[0]), int(link[1])))

    scenario = Scenario(
        name=str(raw.get("name", "unnamed")),
        nodes=tuple(nodes),
        wired_links=tuple(links),
        duration=float(_require(raw, "duration_s", "scenario")),
        seed=int(_require(raw, "seed", "scenario")),
        wap_enabled=bool(raw.get("wap_enabled", True)),
        handoff=_section(HandoffConfig, raw.get("handoff"), "handoff", {
            "scan_interval_s": "scan_interval",
            "candidate_threshold_dbm": "candidate_threshold",
            "drop_threshold_dbm": "drop_threshold",
            "soft_threshold_dbm": "soft_threshold",
            "hysteresis_margin_db": "hysteresis_margin",
        }),
        routing=_section(RoutingConfig, raw.get("routing"), "routing", {
            "advertisement_interval_s": "advertisement_interval",
        }),
        traffic=_section(TrafficConfig, raw.get("traffic"), "traffic", {
            "voice_interval_s": "voice_interval",
        }),
        mac=_section(MacConfig, raw.get("mac"), "mac", {}),
        wired=_section(WiredConfig, raw.get("wired"), "wired", {"delay_s": "delay"}),
        mobility_tick=float(raw.get("mobility_tick_s", 0.1)),
        stats_interval=float(raw.get("stats_interval_s", 1.0)),
        source=raw,
    )
    violations = validate(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario


def validate(scenario: Scenario) -> list[str]:
    """Every invariant violation in ``scenario``, each naming the offending field."""
    problems = []
    seen: set[int] = set()
    for i, n in enumerate(scenario.nodes):
        if n.id in seen:
            problems.append(f"nodes[{i}].id: duplicate node id {n.id}")
        seen.add(n.id)
        if n.kind not in NODE_KINDS:
            problems.append(f"nodes[{i}].kind: unknown kind '{n.kind}' (expected one of {', '.join(NODE_KINDS)})")
        elif n.kind != "msc" and n.radio is None:
            problems.append(f"nodes[{i}].radio: {n.kind} node {n.id} needs a radio profile")

    mscs = scenario.ids_of("msc")
    if len(mscs) == 0:
        problems.append("nodes: missing MSC (exactly one node of kind 'msc' is required)")
    elif len(mscs) > 1:
        problems.append(f"nodes: duplicate MSC, found {len(mscs)} MSC nodes {mscs}")
    if not scenario.ids_of("base_station"):
        problems.append("nodes: at least one base_station is required")
    if not scenario.ids_of("mobile_station"):
        problems.append("nodes: at least one mobile_station is required")

    for i, (a, b) in enumerate(scenario.wired_links):
        for end in (a, b):
            if end not in seen:
                problems.append(f"wired_links[{i}]: unknown node id {end}")
        if a == b:
            problems.append(f"wired_links[{i}]: self-loop on node {a}")

    if len(mscs) == 1:
        reachable = _wired_reachable(scenario, mscs[0])
        for n in scenario.nodes:
            if n.kind in ("base_station", "wap") and n.id not in reachable:
                problems.append(f"wired_links: {n.kind} node {n.id} has no backhaul path to the MSC {mscs[0]}")

    if scenario.duration < 0:
        problems.append("duration_s: must be non-negative")
    if scenario.mobility_tick <= 0:
        problems.append("mobility_tick_s: must be positive")
    if scenario.stats_interval <= 0:
        problems.append("stats_interval_s: must be positive")
    if scenario.routing.advertisement_interval <= 0:
        problems.append("routing.advertisement_interval_s: must be positive")
    if scenario.traffic.voice_interval <= 0:
        problems.append("traffic.voice_interval_s: must be positive")
    return problems


def _wired_reachable(scenario: Scenario, start: int) -> set[int]:
    adjacency: dict[int, set[int]] = {}
    for a, b in scenario.wired_links:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    seen = {start}
    queue = deque([start])
    while queue:
        here = queue.popleft()
        for nxt in adjacency.get(here, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen
