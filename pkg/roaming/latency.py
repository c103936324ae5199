"""
Timing formulas of the 802.11 handoff and of the pre-scan procedure.

Every quantity is an integer number of microseconds wrapped in ``Duration``;
the functions here are pure and are used both by the schemes and by the
``--check`` self-test.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_core import core_schema

_MAX_MICROS = 2**63 - 1
_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(us|µs|ms|s)?\s*$")
_UNIT_MICROS = {"us": 1, "µs": 1, "ms": 1_000, "s": 1_000_000, None: 1_000}


def _round_half_up(value: Decimal) -> int:
    return int(value.to_integral_value(rounding=ROUND_HALF_UP))


@dataclass(frozen=True, order=True, slots=True)
class Duration:
    """Non-negative whole microseconds with checked arithmetic."""

    micros: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.micros, bool) or not isinstance(self.micros, int):
            raise TypeError(f"Duration needs integer microseconds, got {self.micros!r}")
        if not 0 <= self.micros <= _MAX_MICROS:
            raise OverflowError(f"Duration out of range: {self.micros} us")

    @classmethod
    def us(cls, value: int) -> "Duration":
        return cls(int(value))

    @classmethod
    def ms(cls, value: Union[int, float, str]) -> "Duration":
        return cls(_round_half_up(Decimal(str(value)) * 1_000))

    @classmethod
    def seconds(cls, value: Union[int, float, str]) -> "Duration":
        return cls(_round_half_up(Decimal(str(value)) * 1_000_000))

    @classmethod
    def parse(cls, value: Any) -> "Duration":
        """Accept a Duration, a bare number (milliseconds) or '<number><us|ms|s>'."""
        if isinstance(value, Duration):
            return value
        if isinstance(value, bool):
            raise ValueError("a boolean is not a duration")
        if isinstance(value, (int, float)):
            if value < 0:
                raise ValueError(f"duration must be non-negative, got {value}")
            return cls.ms(value)
        if isinstance(value, str):
            match = _DURATION_RE.match(value)
            if not match:
                raise ValueError(f"cannot read {value!r} as a duration (try '7ms' or '150us')")
            number, unit = match.groups()
            return cls(_round_half_up(Decimal(number) * _UNIT_MICROS[unit]))
        raise ValueError(f"cannot read {value!r} as a duration")

    @classmethod
    def __get_pydantic_core_schema__(cls, source: Any, handler: Any) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls.parse,
            serialization=core_schema.plain_serializer_function_ser_schema(str),
        )

    def __add__(self, other: "Duration") -> "Duration":
        if not isinstance(other, Duration):
            return NotImplemented
        return Duration(self.micros + other.micros)

    def __sub__(self, other: "Duration") -> "Duration":
        if not isinstance(other, Duration):
            return NotImplemented
        return Duration(self.micros - other.micros)

    def __mul__(self, factor: int) -> "Duration":
        if isinstance(factor, bool) or not isinstance(factor, int):
            return NotImplemented
        return Duration(self.micros * factor)

    __rmul__ = __mul__

    def scaled(self, factor: float) -> "Duration":
        """Multiply by a real factor, rounding half-up to whole microseconds."""
        return Duration(_round_half_up(Decimal(self.micros) * Decimal(str(factor))))

    @property
    def millis(self) -> float:
        return self.micros / 1_000

    def __str__(self) -> str:
        if self.micros % 1_000 == 0:
            return f"{self.micros // 1_000}ms"
        return f"{self.micros}us"


ZERO = Duration(0)


class AuthMethod(str, Enum):
    OPEN_SYSTEM = "open_system"
    SHARED_KEY = "shared_key"


class PrescanMode(str, Enum):
    INTERLEAVED = "interleaved"
    CONTIGUOUS = "contiguous"


def auth_frames(method: AuthMethod) -> int:
    """Frames exchanged by an authentication: 2 for open system, 4 for shared key."""
    return 4 if method is AuthMethod.SHARED_KEY else 2


def min_channel_time_bound(difs: Duration, cw: int, slot: Duration) -> Duration:
    """Shortest legal MinChannelTime: DIFS + CW * SlotTime."""
    if cw < 0:
        raise ValueError("contention window must be non-negative")
    return difs + slot * cw


class TimingParams(BaseModel):
    """MAC timing used by scans, pre-scans and (re)association."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_channels: int = Field(default=11, ge=1)
    min_channel_time: Duration = Duration.ms(7)
    max_channel_time: Duration = Duration.ms(11)
    t_switch: Duration = Duration.ms(5)
    difs: Duration = Duration.us(50)
    slot_time: Duration = Duration.us(20)
    cw: int = Field(default=31, ge=0)
    t_auth: Duration = Duration.ms(2)
    t_assoc: Duration = Duration.ms(2)
    beacon_interval: Duration = Duration.ms(100)

    # pre-scan dwell per channel; None means MaxChannelTime
    t_wait: Optional[Duration] = None
    auth_method: AuthMethod = AuthMethod.OPEN_SYSTEM
    assoc_frames: int = Field(default=2, ge=1)
    retry_backoff: Duration = Duration.ms(100)
    prescan_mode: PrescanMode = PrescanMode.CONTIGUOUS

    @model_validator(mode="after")
    def _check_bounds(self) -> "TimingParams":
        if self.min_channel_time > self.max_channel_time:
            raise ValueError("min_channel_time must not exceed max_channel_time")
        bound = min_channel_time_bound(self.difs, self.cw, self.slot_time)
        if self.min_channel_time < bound:
            raise ValueError(
                f"min_channel_time {self.min_channel_time} is below DIFS + CW*SlotTime = {bound}"
            )
        if prescan_period_alpha(self) < prescan_time(self, self.prescan_wait):
            raise ValueError(
                "pre-scan period alpha is shorter than one pre-scan cycle; lower t_wait"
            )
        return self

    @property
    def prescan_wait(self) -> Duration:
        return self.t_wait if self.t_wait is not None else self.max_channel_time

    @property
    def auth_frame_count(self) -> int:
        return auth_frames(self.auth_method)


def probe_time_bounds(p: TimingParams) -> tuple[Duration, Duration]:
    """Lower and upper bound of the probe phase over all channels."""
    return p.min_channel_time * p.n_channels, p.max_channel_time * p.n_channels


def handover_latency(p: TimingParams, t_probe_per_channel: Duration) -> Duration:
    """N * (T_switch + T_probe) + T_authentication + T_association."""
    return (p.t_switch + t_probe_per_channel) * p.n_channels + p.t_auth + p.t_assoc


def syncscan_delay(t_switch: Duration, t_wait: Duration) -> Duration:
    """Per-channel cost of a synchronized scan: out, wait for the beacon, back."""
    return t_switch * 2 + t_wait


def prescan_time(p: TimingParams, t_wait: Optional[Duration] = None) -> Duration:
    """Total off-channel time of one pre-scan cycle, N * (T_switch + T_wait)."""
    wait = p.prescan_wait if t_wait is None else t_wait
    return (p.t_switch + wait) * p.n_channels


def prescan_period_alpha(p: TimingParams) -> Duration:
    """Pre-scan period: 1.5 * N * (T_switch + MaxChannelTime), half-up to whole us."""
    base = (p.t_switch + p.max_channel_time).micros * p.n_channels
    return Duration((3 * base + 1) // 2)

