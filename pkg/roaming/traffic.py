"""
Downlink traffic towards the mobile stations and AP-side power-save buffering.

VoIP frames leave the source every 20 ms and must reach the station within
50 ms; non-real-time frames have no deadline. While a station announces PSM
its AP queues the frames and flushes them back to back when it returns.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from roaming.latency import Duration

MAX_ACTIVE_PER_CELL = 32


class TrafficPreset(str, Enum):
    VOIP_ONLY = "voip_only"
    MIX_75_25 = "mix_75_25"
    MIX_50_50 = "mix_50_50"


# share of stations carrying real-time traffic
REALTIME_SHARE: dict[TrafficPreset, float] = {
    TrafficPreset.VOIP_ONLY: 1.0,
    TrafficPreset.MIX_75_25: 0.75,
    TrafficPreset.MIX_50_50: 0.5,
}


@dataclass(frozen=True, slots=True)
class Packet:
    ms_id: int
    seq: int
    emitted_at: int
    realtime: bool


@dataclass(slots=True)
class VoipSource:
    """Periodic emitter; ``deadline`` is None for non-real-time flows."""

    ms_id: int
    inter_arrival: Duration = Duration.ms(20)
    deadline: Optional[Duration] = Duration.ms(50)
    next_emit: int = 0
    emitted: int = 0

    def __post_init__(self) -> None:
        if self.inter_arrival.micros <= 0:
            raise ValueError("inter_arrival must be positive")
        if self.deadline is not None and self.deadline <= self.inter_arrival:
            raise ValueError("deadline must exceed inter_arrival")

    @property
    def realtime(self) -> bool:
        return self.deadline is not None


def next_packet(src: VoipSource, now: int) -> Optional[Packet]:
    """Emit the packet due at the current boundary, if ``now`` has reached it."""
    if now < src.next_emit:
        return None
    packet = Packet(src.ms_id, src.emitted, src.next_emit, src.realtime)
    src.emitted += 1
    src.next_emit += src.inter_arrival.micros
    return packet


def misses_deadline(packet: Packet, delivered_at: int, deadline: Optional[Duration]) -> bool:
    if deadline is None or not packet.realtime:
        return False
    return delivered_at - packet.emitted_at > deadline.micros


class LoadModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    active_ms_per_cell: int = Field(default=0, ge=0, le=MAX_ACTIVE_PER_CELL)
    max_active: int = MAX_ACTIVE_PER_CELL

    @property
    def load_fraction(self) -> float:
        return self.active_ms_per_cell / self.max_active

    @classmethod
    def from_fraction(cls, load: float) -> "LoadModel":
        if not 0.0 <= load <= 1.0:
            raise ValueError(f"traffic load must lie in [0, 1], got {load}")
        return cls(active_ms_per_cell=int(math.floor(load * MAX_ACTIVE_PER_CELL + 0.5)))


class ContentionModel(BaseModel):
    """base_delay * (1 + contention_factor * load) with uniform +/- jitter."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    base_delay: Duration = Duration.ms(1)
    contention_factor: float = Field(default=4.0, ge=0.0)
    jitter: float = Field(default=0.2, ge=0.0, lt=1.0)


def medium_access_delay(
    load: LoadModel, rng: np.random.Generator, model: ContentionModel = ContentionModel()
) -> Duration:
    mean = model.base_delay.micros * (1.0 + model.contention_factor * load.load_fraction)
    if model.jitter > 0.0:
        mean *= 1.0 + float(rng.uniform(-model.jitter, model.jitter))
    return Duration(int(math.floor(mean + 0.5)))


@dataclass(slots=True)
class FlushResult:
    delivered: list[tuple[Packet, int]] = field(default_factory=list)
    deadline_drops: list[tuple[Packet, int]] = field(default_factory=list)


@dataclass(slots=True)
class PsmBuffer:
    capacity: int = 64
    queue: deque[Packet] = field(default_factory=deque)
    active: bool = False
    overflow_drops: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("PSM buffer capacity must be at least 1")

    def offer(self, packet: Packet) -> Optional[Packet]:
        """Queue ``packet``; returns the evicted oldest packet when full."""
        evicted = None
        if len(self.queue) >= self.capacity:
            evicted = self.queue.popleft()
            self.overflow_drops += 1
        self.queue.append(packet)
        return evicted


class PsmTable:
    """Per-AP power-save state of the associated stations."""

    def __init__(self, capacity: int = 64) -> None:
        self.capacity = capacity
        self._buffers: dict[tuple[int, int], PsmBuffer] = {}

    def buffer(self, ap_id: int, ms_id: int) -> PsmBuffer:
        key = (ap_id, ms_id)
        if key not in self._buffers:
            self._buffers[key] = PsmBuffer(self.capacity)
        return self._buffers[key]

    def is_dozing(self, ap_id: int, ms_id: int) -> bool:
        buf = self._buffers.get((ap_id, ms_id))
        return buf is not None and buf.active

    def discard(self, ap_id: int, ms_id: int) -> list[Packet]:
        """Drop the station's PSM state at ``ap_id``, returning whatever was queued."""
        buf = self._buffers.pop((ap_id, ms_id), None)
        return list(buf.queue) if buf is not None else []

    def backlog(self) -> dict[int, int]:
        """Queued packets per MS, over every AP."""
        out: dict[int, int] = {}
        for (_, ms_id), buf in self._buffers.items():
            out[ms_id] = out.get(ms_id, 0) + len(buf.queue)
        return out


def psm_enter(table: PsmTable, ap_id: int, ms_id: int, now: int) -> None:
    table.buffer(ap_id, ms_id).active = True


def psm_flush(
    table: PsmTable,
    ap_id: int,
    ms_id: int,
    now: int,
    access_delay: Callable[[], Duration],
    deadline: Optional[Duration],
) -> FlushResult:
    """Leave PSM and deliver the queue FIFO, back to back from ``now``."""
    buf = table.buffer(ap_id, ms_id)
    buf.active = False
    result = FlushResult()
    t = now
    while buf.queue:
        packet = buf.queue.popleft()
        t += access_delay().micros
        if misses_deadline(packet, t, deadline):
            result.deadline_drops.append((packet, t))
        else:
            result.delivered.append((packet, t))
    return result
