"""Propagation and physical-layer reception outcomes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

# constant term of free-space loss with distance in km and frequency in MHz
FSPL_CONSTANT_DB = 32.44


class SingularityError(ValueError):
    """Raised for a non-positive distance or frequency."""


class Outcome(enum.Enum):
    NOT_DETECTED = "not-detected"
    LOCKED_WITH_ERROR = "locked-with-error"
    DELIVERED_TO_MAC = "delivered-to-mac"


@dataclass(frozen=True)
class RadioProfile:
    tx_power: float  # dBm
    frequency: float  # MHz
    sensitivity: float  # dBm, carrier-sense floor
    lock_threshold: float  # dBm, minimum to attempt decode
    error_floor_margin: float  # dB above lock_threshold where decode may fail
    path_loss_exponent: float = 2.0

    def __post_init__(self) -> None:
        if self.sensitivity > self.lock_threshold:
            raise ValueError("sensitivity must not exceed lock_threshold")
        if self.error_floor_margin < 0:
            raise ValueError("error_floor_margin must be non-negative")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")


@dataclass(frozen=True)
class SignalSample:
    source: int
    rx_power: float
    measured_at: float = 0.0


def path_loss_db(distance: float, frequency: float, exponent: float = 2.0) -> float:
    """Path loss in dB for ``distance`` meters at ``frequency`` MHz.

    With the default exponent of 2 this is free-space loss,
    ``20 log10(d_km) + 20 log10(f_MHz) + 32.44``. Other exponents give a
    log-distance model anchored to the free-space loss at 1 m.
    """
    if distance <= 0:
        raise SingularityError(f"path loss undefined at distance {distance} m")
    if frequency <= 0:
        raise SingularityError(f"path loss undefined at frequency {frequency} MHz")
    if exponent == 2.0:
        return 20 * math.log10(distance / 1000.0) + 20 * math.log10(frequency) + FSPL_CONSTANT_DB
    reference = 20 * math.log10(1e-3) + 20 * math.log10(frequency) + FSPL_CONSTANT_DB
    return reference + 10 * exponent * math.log10(distance)


def received_power_dbm(tx: RadioProfile, distance: float) -> float:
    return tx.tx_power - path_loss_db(distance, tx.frequency, tx.path_loss_exponent)


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def coverage_radius(tx: RadioProfile, threshold_dbm: float) -> float:
    """Distance (m) at which ``tx`` is received at exactly ``threshold_dbm``."""
    budget = tx.tx_power - threshold_dbm
    reference = path_loss_db(1.0, tx.frequency, tx.path_loss_exponent)
    return 10 ** ((budget - reference) / (10 * tx.path_loss_exponent))


def detectable(rx_power: float, profile: RadioProfile) -> bool:
    return rx_power >= profile.sensitivity


def error_probability(rx_power: float, profile: RadioProfile) -> float:
    """Linear ramp: 1 at the lock threshold, 0 at lock threshold + margin."""
    if rx_power < profile.lock_threshold:
        return 1.0
    if profile.error_floor_margin == 0:
        return 0.0
    excess = rx_power - profile.lock_threshold
    return max(0.0, 1.0 - excess / profile.error_floor_margin)


def reception_outcome(rx_power: float, rx_profile: RadioProfile, draw: float) -> Outcome:
    if rx_power < rx_profile.lock_threshold:
        return Outcome.NOT_DETECTED
    if rx_power < rx_profile.lock_threshold + rx_profile.error_floor_margin:
        if draw < error_probability(rx_power, rx_profile):
            return Outcome.LOCKED_WITH_ERROR
    return Outcome.DELIVERED_TO_MAC
