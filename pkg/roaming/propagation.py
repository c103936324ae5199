"""
Geometry to signal strength, and signal strength to link-quality zones.

Received power follows the free-space model P0 - 20 log10(4 pi d / lambda).
All signal values are handled as dBm on one scale; only differences and
comparisons matter to the handoff logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

SPEED_OF_LIGHT = 299_792_458.0  # m/s
_FOUR_PI = 4.0 * math.pi

Dbm = float


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


def wavelength(frequency_hz: float) -> float:
    _require_finite("frequency", frequency_hz)
    if frequency_hz <= 0:
        raise ValueError("frequency must be positive")
    return SPEED_OF_LIGHT / frequency_hz


def received_power(p0: Dbm, d: float, f: float) -> Dbm:
    """Received power in dBm at distance ``d`` meters for carrier ``f`` Hz.

    Args:
        p0: transmit power in dBm
        d: distance in meters (> 0)
        f: frequency in Hz (> 0)
    """
    _require_finite("p0", p0)
    _require_finite("distance", d)
    if d <= 0:
        raise ValueError("distance must be positive (the model is singular at the antenna)")
    lam = wavelength(f)
    return p0 - 20.0 * math.log10(_FOUR_PI * d / lam)


def tx_power_for_edge(rssi_target: Dbm, d: float, f: float) -> Dbm:
    """Transmit power for which ``received_power(p0, d, f) == rssi_target``."""
    _require_finite("rssi_target", rssi_target)
    return rssi_target - received_power(0.0, d, f)


def prevent_threshold(rssi_min: Dbm, rssi_max: Dbm) -> Dbm:
    """Preventive RSSI: the midpoint between the handoff threshold and the best link."""
    _require_finite("rssi_min", rssi_min)
    _require_finite("rssi_max", rssi_max)
    if rssi_min >= rssi_max:
        raise ValueError(
            f"rssi_min ({rssi_min}) must be strictly below rssi_max ({rssi_max})"
        )
    return rssi_min + (rssi_max - rssi_min) / 2.0


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        _require_finite("x", self.x)
        _require_finite("y", self.y)

    def distance_to(self, other: Position) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class Zone(str, Enum):
    SAFE = "safe"
    GRAY = "gray"
    HANDOVER = "handover"


class Thresholds(BaseModel):
    """Handoff threshold and best attainable link; the preventive threshold is derived."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rssi_min: Dbm = -51.0
    rssi_max: Dbm = -39.0
    # set by from_prescan: the value as configured, not the recomputed midpoint
    stated_prev: Optional[Dbm] = None

    @model_validator(mode="after")
    def _check_order(self) -> "Thresholds":
        prevent_threshold(self.rssi_min, self.rssi_max)
        if self.stated_prev is not None and not self.rssi_min < self.stated_prev < self.rssi_max:
            raise ValueError("rssi_prev must lie between rssi_min and rssi_max")
        return self

    @property
    def rssi_prev(self) -> Dbm:
        if self.stated_prev is not None:
            return self.stated_prev
        return prevent_threshold(self.rssi_min, self.rssi_max)

    @classmethod
    def from_prescan(cls, rssi_min: Dbm, rssi_prev: Dbm) -> "Thresholds":
        """Build from the handoff and pre-scan thresholds as scenario files state them."""
        if rssi_prev <= rssi_min:
            raise ValueError("rssi_prev must be above rssi_min")
        return cls(
            rssi_min=rssi_min, rssi_max=2.0 * rssi_prev - rssi_min, stated_prev=rssi_prev
        )


def classify_zone(rssi: Dbm, t: Thresholds) -> Zone:
    # closed-upper convention: rssi_prev itself is Safe, rssi_min itself is Handover
    if rssi >= t.rssi_prev:
        return Zone.SAFE
    if rssi > t.rssi_min:
        return Zone.GRAY
    return Zone.HANDOVER


class RegionPenalty(BaseModel):
    """Extra attenuation applied while a MS stands inside a rectangle."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    x0: float
    y0: float
    x1: float
    y1: float
    penalty_db: float = Field(ge=0.0)
    ap: Optional[int] = None

    @model_validator(mode="after")
    def _check_rectangle(self) -> "RegionPenalty":
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("region corners must satisfy x0 <= x1 and y0 <= y1")
        return self

    def applies(self, ap_id: int, where: Position) -> bool:
        if self.ap is not None and self.ap != ap_id:
            return False
        return self.x0 <= where.x <= self.x1 and self.y0 <= where.y <= self.y1


class LinkBudget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tx_power_dbm: Dbm
    frequency_hz: float = Field(default=2.437e9, gt=0)
    noise_std_db: float = Field(default=0.0, ge=0.0)
    region_penalties: tuple[RegionPenalty, ...] = ()

    def rssi(
        self,
        ap_id: int,
        ap_position: Position,
        ms_position: Position,
        rng: Optional[np.random.Generator] = None,
    ) -> Dbm:
        # a MS sitting on the antenna is treated as 1 cm away
        d = max(ap_position.distance_to(ms_position), 0.01)
        value = received_power(self.tx_power_dbm, d, self.frequency_hz)
        for region in self.region_penalties:
            if region.applies(ap_id, ms_position):
                value -= region.penalty_db
        if self.noise_std_db > 0.0 and rng is not None:
            value += float(rng.normal(0.0, self.noise_std_db))
        return value
