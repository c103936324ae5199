"""
Per-run measurements: handoff records, packet fate counters and delay traces.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from roaming.schemes.base import HandoffForm, HandoffRecord

FORMS = (HandoffForm.FORM1, HandoffForm.FORM2, HandoffForm.FORM3, HandoffForm.BASELINE)


@dataclass(frozen=True, slots=True)
class RunHeader:
    seed: int
    scheme: str
    selection: str
    load: float
    tx_power_dbm: float
    arena: tuple[float, float]
    n_aps: int
    n_stations: int
    duration_us: int

    @property
    def run_id(self) -> str:
        return f"{self.scheme}-{self.selection}-l{self.load:g}-s{self.seed}"

    def render(self) -> str:
        return (
            f"run_id={self.run_id} seed={self.seed} scheme={self.scheme} "
            f"selection={self.selection} load={self.load!r} tx_power_dbm={self.tx_power_dbm!r} "
            f"arena={self.arena[0]!r}x{self.arena[1]!r} aps={self.n_aps} "
            f"stations={self.n_stations} duration_us={self.duration_us}"
        )


@dataclass(slots=True)
class PacketCounters:
    emitted: int = 0
    delivered: int = 0
    deadline_drops: int = 0
    buffer_drops: int = 0
    handoff_losses: int = 0
    in_flight: int = 0

    def balanced(self) -> bool:
        return self.emitted == (
            self.delivered
            + self.deadline_drops
            + self.buffer_drops
            + self.handoff_losses
            + self.in_flight
        )


@dataclass
class MetricsLedger:
    header: Optional[RunHeader] = None
    records: list[HandoffRecord] = field(default_factory=list)
    packets: PacketCounters = field(default_factory=PacketCounters)
    per_station: dict[int, PacketCounters] = field(default_factory=dict)
    # delivery times of real-time packets per MS
    deliveries: dict[int, list[int]] = field(default_factory=dict)
    counters: Counter[str] = field(default_factory=Counter)
    # neighbor context as it stood at the end of the run
    context: Optional[dict[str, Any]] = None

    # -- recording --------------------------------------------------------

    def station(self, ms_id: int) -> PacketCounters:
        if ms_id not in self.per_station:
            self.per_station[ms_id] = PacketCounters()
        return self.per_station[ms_id]

    def packet(self, ms_id: int, fate: str, n: int = 1) -> None:
        for counters in (self.packets, self.station(ms_id)):
            setattr(counters, fate, getattr(counters, fate) + n)

    def delivered(self, ms_id: int, at: int, realtime: bool) -> None:
        self.packet(ms_id, "delivered")
        if realtime:
            self.deliveries.setdefault(ms_id, []).append(at)

    def add_record(self, record: HandoffRecord) -> None:
        self.records.append(record)

    def count(self, name: str, n: int = 1) -> None:
        self.counters[name] += n

    # -- statistics -------------------------------------------------------

    @property
    def handoff_count(self) -> int:
        return len(self.records)

    def latencies_us(self) -> np.ndarray:
        return np.array([r.latency.micros for r in self.records], dtype=np.int64)

    def form_counts(self) -> dict[HandoffForm, int]:
        counts = Counter(r.form for r in self.records)
        return {form: counts.get(form, 0) for form in FORMS}

    def form_fractions(self) -> dict[HandoffForm, float]:
        total = self.handoff_count
        counts = self.form_counts()
        return {form: (counts[form] / total if total else 0.0) for form in FORMS}

    def latency_stats(self) -> dict[str, float]:
        lat = self.latencies_us()
        if lat.size == 0:
            return {"mean": 0.0, "median": 0.0, "p95": 0.0}
        return {
            "mean": float(np.mean(lat)),
            "median": float(np.median(lat)),
            "p95": float(np.percentile(lat, 95, method="linear")),
        }

    @property
    def loss_probability(self) -> float:
        p = self.packets
        if p.emitted == 0:
            return 0.0
        return (p.deadline_drops + p.handoff_losses) / p.emitted

    def inter_frame_delays(self, ms_id: int) -> np.ndarray:
        times = np.sort(np.array(self.deliveries.get(ms_id, []), dtype=np.int64))
        return np.diff(times)

    def inter_frame_stats(self) -> dict[str, float]:
        """Largest and 95th percentile gap between real-time deliveries, pooled over stations."""
        gaps = [self.inter_frame_delays(ms_id) for ms_id in sorted(self.deliveries)]
        pooled = np.concatenate(gaps) if gaps else np.empty(0, dtype=np.int64)
        if pooled.size == 0:
            return {"max": 0.0, "p95": 0.0}
        return {
            "max": float(np.max(pooled)),
            "p95": float(np.percentile(pooled, 95, method="linear")),
        }

    def conservation_holds(self) -> bool:
        return self.packets.balanced() and all(c.balanced() for c in self.per_station.values())

    # -- determinism ------------------------------------------------------

    def canonical(self) -> dict[str, Any]:
        return {
            "header": self.header.render() if self.header else None,
            "records": [
                [
                    r.ms_id,
                    r.from_ap,
                    r.to_ap,
                    r.form.value,
                    r.trigger_time,
                    r.complete_time,
                    [list(c) for c in r.components],
                    r.interrupted_prescan,
                ]
                for r in self.records
            ],
            "packets": [
                self.packets.emitted,
                self.packets.delivered,
                self.packets.deadline_drops,
                self.packets.buffer_drops,
                self.packets.handoff_losses,
                self.packets.in_flight,
            ],
            "deliveries": {str(k): v for k, v in sorted(self.deliveries.items())},
            "counters": dict(sorted(self.counters.items())),
        }

    def digest(self) -> str:
        """SHA-256 of the canonical rendering; equal ledgers hash equal."""
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()
