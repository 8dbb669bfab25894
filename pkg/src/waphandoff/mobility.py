"""Planar node mobility: static, circular and waypoint paths."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

Position = tuple[float, float]


@dataclass(frozen=True)
class Static:
    position: Position

    def position_at(self, t: float) -> Position:
        return self.position


@dataclass(frozen=True)
class CircularPath:
    center: Position
    radius: float
    angular_speed: float  # rad/s, negative is clockwise
    start_angle: float = 0.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.angular_speed == 0:
            raise ValueError("angular_speed must be non-zero")

    @property
    def period(self) -> float:
        return 2 * math.pi / abs(self.angular_speed)

    def position_at(self, t: float) -> Position:
        angle = self.start_angle + self.angular_speed * t
        return (
            self.center[0] + self.radius * math.cos(angle),
            self.center[1] + self.radius * math.sin(angle),
        )


@dataclass(frozen=True)
class WaypointPath:
    waypoints: tuple[tuple[Position, float], ...]  # (position, arrival_time)

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("at least one waypoint is required")
        times = [t for _, t in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint arrival times must be strictly increasing")

    def position_at(self, t: float) -> Position:
        times = [arrival for _, arrival in self.waypoints]
        if t <= times[0]:
            return self.waypoints[0][0]
        if t >= times[-1]:
            return self.waypoints[-1][0]
        i = bisect.bisect_right(times, t)
        (x0, y0), t0 = self.waypoints[i - 1]
        (x1, y1), t1 = self.waypoints[i]
        frac = (t - t0) / (t1 - t0)
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


Path = Static | CircularPath | WaypointPath


def position_at(path: Path, t: float) -> Position:
    if t < 0:
        raise ValueError("time must be non-negative")
    return path.position_at(t)
