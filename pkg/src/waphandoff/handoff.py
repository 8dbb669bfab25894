"""Mobile-station handoff decision state machine.

Each scan tick the mobile measures every base station and access point in
range, ranks them by received power, and decides whether to stay, hand the
call over, or (after repeated empty scans on a failing link) drop it. A
handoff is soft (make-before-break) when the old anchor is still usable and
hard (break-before-make) otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .radio import RadioProfile, SignalSample, distance, received_power_dbm

Position = tuple[float, float]


@dataclass(frozen=True)
class HandoffConfig:
    scan_interval: float = 0.5  # s
    candidate_threshold: float = -85.0  # dBm
    drop_threshold: float = -88.0  # dBm
    soft_threshold: float = -90.0  # dBm
    hysteresis_margin: float = 3.0  # dB
    max_attempts: int = 3

    def __post_init__(self) -> None:
        if self.drop_threshold > self.candidate_threshold:
            raise ValueError("drop_threshold must not exceed candidate_threshold")
        if self.hysteresis_margin < 0:
            raise ValueError("hysteresis_margin must be non-negative")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.scan_interval <= 0:
            raise ValueError("scan_interval must be positive")


class HandoffType(enum.Enum):
    SOFT = "soft"
    HARD = "hard"


# states


@dataclass(frozen=True)
class Attached:
    anchor: int


@dataclass(frozen=True)
class Scanning:
    anchor: int
    failed_attempts: int


@dataclass(frozen=True)
class SoftHandoff:
    old: int
    new: int
    since: float

    def __post_init__(self) -> None:
        if self.old == self.new:
            raise ValueError("soft handoff needs two distinct anchors")


@dataclass(frozen=True)
class Unattached:
    failed_attempts: int = 0


@dataclass(frozen=True)
class Dropped:
    pass


HandoffState = Attached | Scanning | SoftHandoff | Unattached | Dropped


# actions


@dataclass(frozen=True)
class AttachTo:
    node: int


@dataclass(frozen=True)
class DetachFrom:
    node: int


@dataclass(frozen=True)
class DeclareDrop:
    pass


HandoffAction = AttachTo | DetachFrom | DeclareDrop


def scan_candidates(
    ms_position: Position,
    transmitters: Iterable[tuple[int, RadioProfile, Position]],
    candidate_threshold: float,
    measured_at: float = 0.0,
) -> list[SignalSample]:
    """Samples at or above the candidate threshold, strongest first, ties by node id."""
    samples = []
    for node, profile, position in transmitters:
        d = max(distance(ms_position, position), 1e-3)
        power = received_power_dbm(profile, d)
        if power >= candidate_threshold:
            samples.append(SignalSample(node, power, measured_at))
    samples.sort(key=lambda s: (-s.rx_power, s.source))
    return samples


def select_best(candidates: Sequence[SignalSample]) -> int | None:
    return candidates[0].source if candidates else None


def classify_handoff_type(current_anchor_rssi: float | None, config: HandoffConfig) -> HandoffType:
    if current_anchor_rssi is not None and current_anchor_rssi >= config.soft_threshold:
        return HandoffType.SOFT
    return HandoffType.HARD


def _hand_over(
    anchor: int, anchor_rssi: float | None, target: int, config: HandoffConfig, now: float
) -> tuple[HandoffState, tuple[HandoffAction, ...]]:
    if classify_handoff_type(anchor_rssi, config) is HandoffType.SOFT:
        return SoftHandoff(anchor, target, now), (AttachTo(target),)
    return Attached(target), (DetachFrom(anchor), AttachTo(target))


def _evaluate_attached(
    anchor: int,
    anchor_rssi: float | None,
    candidates: Sequence[SignalSample],
    config: HandoffConfig,
    now: float,
) -> tuple[HandoffState, tuple[HandoffAction, ...]]:
    others = [c for c in candidates if c.source != anchor]
    best = others[0] if others else None
    failing = anchor_rssi is None or anchor_rssi < config.drop_threshold
    if best is not None:
        if failing or best.rx_power > anchor_rssi + config.hysteresis_margin:
            return _hand_over(anchor, anchor_rssi, best.source, config, now)
    if failing:
        return Scanning(anchor, 1), ()
    return Attached(anchor), ()


def step(
    state: HandoffState,
    anchor_rssi: float | None,
    candidates: Sequence[SignalSample],
    config: HandoffConfig,
    now: float = 0.0,
) -> tuple[HandoffState, tuple[HandoffAction, ...]]:
    """Advance the state machine by one scan tick.

    ``anchor_rssi`` is the current anchor's received power, or ``None`` when
    it can no longer be detected; ``candidates`` comes from
    :func:`scan_candidates`. Returns the next state and the actions to carry
    out, in order. An empty action tuple means nothing to do.
    """
    match state:
        case Dropped():
            return state, ()
        case Attached(anchor):
            return _evaluate_attached(anchor, anchor_rssi, candidates, config, now)
        case SoftHandoff(old, new, _):
            return Attached(new), (DetachFrom(old),)
        case Scanning(anchor, failed):
            if anchor_rssi is not None and anchor_rssi >= config.drop_threshold:
                return _evaluate_attached(anchor, anchor_rssi, candidates, config, now)
            others = [c for c in candidates if c.source != anchor]
            if others:
                return _hand_over(anchor, anchor_rssi, others[0].source, config, now)
            if failed + 1 > config.max_attempts:
                return Dropped(), (DeclareDrop(),)
            return Scanning(anchor, failed + 1), ()
        case Unattached(failed):
            if candidates:
                return Attached(candidates[0].source), (AttachTo(candidates[0].source),)
            if failed + 1 > config.max_attempts:
                return Dropped(), (DeclareDrop(),)
            return Unattached(failed + 1), ()
    raise TypeError(f"unknown handoff state {state!r}")


def anchors_of(state: HandoffState) -> tuple[int, ...]:
    """Nodes the mobile is attached to in ``state`` (the serving one first)."""
    match state:
        case Attached(anchor) | Scanning(anchor, _):
            return (anchor,)
        case SoftHandoff(old, new, _):
            return (new, old)
    return ()
