"""
Deterministic discrete-event core.

Events are ordered by (time, insertion sequence). A single global mobility
tick moves every station in id order and then hands each one its current-AP
RSSI sample. Handoff and pre-scan procedures run as generator processes (see
``roaming.schemes.base``); each ``Hold`` they yield is one queued event.
"""

from __future__ import annotations

import heapq
import logging
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from roaming.config import InitialAssociation, Scenario
from roaming.errors import CausalityError, RoamingError
from roaming.latency import Duration, prescan_period_alpha
from roaming.metrics import MetricsLedger, RunHeader
from roaming.mobility import (
    MobilityModel,
    MobilityState,
    advance,
    initial_state,
    scripted_state,
)
from roaming.propagation import Dbm, Position
from roaming.schemes.apfh import Apfh
from roaming.schemes.base import HandoffRecord, HandoffScheme, Hold, Procedure, SchemeKind
from roaming.schemes.pshp import Pshp
from roaming.schemes.standard import StandardActive, StandardPassive
from roaming.selection import NeighborContext, record_handoff
from roaming.traffic import (
    REALTIME_SHARE,
    Packet,
    PsmTable,
    VoipSource,
    medium_access_delay,
    misses_deadline,
    next_packet,
    psm_enter,
    psm_flush,
)

logger = logging.getLogger(__name__)

# per-MS random substreams
MOBILITY_STREAM = 0
TRAFFIC_STREAM = 1
NOISE_STREAM = 2

SCHEMES: dict[SchemeKind, type[HandoffScheme]] = {
    SchemeKind.STANDARD_ACTIVE: StandardActive,
    SchemeKind.STANDARD_PASSIVE: StandardPassive,
    SchemeKind.APFH: Apfh,
    SchemeKind.PSHP: Pshp,
}

_FATES = {
    "handoff_loss": "handoff_losses",
    "buffer_drop": "buffer_drops",
    "deadline_drop": "deadline_drops",
}

TraceSink = Callable[[int, str, Optional[int], Optional[int], str], None]


def run_header(scenario: Scenario) -> RunHeader:
    selection = scenario.selection.mode.value if scenario.selection.mode else "none"
    arena = scenario.arena_box()
    return RunHeader(
        seed=scenario.run.seed,
        scheme=scenario.scheme.kind.value,
        selection=selection,
        load=scenario.traffic.load,
        tx_power_dbm=scenario.link_budget().tx_power_dbm,
        arena=(arena.width, arena.height),
        n_aps=scenario.aps.n_aps,
        n_stations=scenario.mobility.n_stations,
        duration_us=scenario.run.duration.micros,
    )


def station_rng(seed: int, ms_id: int, stream: int) -> np.random.Generator:
    """PCG64 substream for one (run seed, MS, purpose) triple."""
    seq = np.random.SeedSequence(seed, spawn_key=(ms_id, stream))
    return np.random.Generator(np.random.PCG64(seq))


class EventKind(str, Enum):
    TICK = "tick"
    EMIT = "emit"
    DELIVER = "deliver"
    RESUME = "resume"
    TIMER = "timer"


@dataclass(order=True, slots=True)
class Event:
    time: int
    seq: int
    kind: EventKind = field(compare=False)
    ms_id: Optional[int] = field(compare=False, default=None)
    payload: Any = field(compare=False, default=None)


class EventQueue:
    """Min-heap on (time, seq); ``seq`` grows with every push."""

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._seq = 0
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(
        self, time: int, kind: EventKind, ms_id: Optional[int] = None, payload: Any = None
    ) -> Event:
        if time < self.now:
            raise CausalityError(
                f"cannot schedule {kind.value} at {time} us, now is {self.now} us"
            )
        event = Event(time, self._seq, kind, ms_id, payload)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def peek_time(self) -> Optional[int]:
        return self._heap[0].time if self._heap else None

    def pop(self) -> Event:
        event = heapq.heappop(self._heap)
        self.now = event.time
        return event

    def pending(self) -> Iterator[Event]:
        return iter(sorted(self._heap))


class Process:
    """A running procedure; ``log`` collects (label, delay) of every completed hold."""

    def __init__(
        self,
        pid: int,
        ms_id: int,
        generator: Procedure,
        on_done: Callable[[Any, list[tuple[str, int]]], None],
    ) -> None:
        self.pid = pid
        self.ms_id = ms_id
        self.generator = generator
        self.on_done = on_done
        self.alive = True
        self.log: list[tuple[str, int]] = []
        self.hold: Optional[Hold] = None

    def cancel(self) -> None:
        if self.alive:
            self.alive = False
            self.generator.close()


@dataclass
class Station:
    ms_id: int
    mobility: MobilityState
    ap: int
    source: VoipSource
    rng_mobility: np.random.Generator
    rng_traffic: np.random.Generator
    rng_noise: np.random.Generator
    scheme: Optional[HandoffScheme] = None
    in_handoff: bool = False
    disconnected: bool = False

    @property
    def position(self) -> Position:
        return self.mobility.current


class Simulation:
    """One run of one scenario. Implements the environment schemes act on."""

    def __init__(self, scenario: Scenario, trace: Optional[TraceSink] = None) -> None:
        self.scenario = scenario
        self.timing = scenario.timing
        self.thresholds = scenario.thresholds_model
        self.alpha: Duration = prescan_period_alpha(self.timing)
        self.budget = scenario.link_budget()
        self.rx_sensitivity: Dbm = scenario.aps.rx_sensitivity
        self.ap_positions = scenario.aps.placements()
        self.arena = scenario.arena_box()
        self.tick = scenario.mobility.tick
        self.limits = scenario.mobility.limits()
        self.duration = scenario.run.duration.micros
        self.load = scenario.traffic.load_model()
        self.contention = scenario.traffic.contention()
        self.policy = scenario.policy
        self.kind = scenario.scheme.kind

        self.aps_on_channel: dict[int, list[int]] = {}
        for ap in range(len(self.ap_positions)):
            self.aps_on_channel.setdefault(scenario.channel_of(ap), []).append(ap)

        self.ctx = NeighborContext.from_positions(
            self.ap_positions,
            scenario.aps.radius,
            capacity=scenario.selection.capacity,
            ext_mode=scenario.selection.ext_mode,
        )
        self.ctx.seed_history(scenario.selection.initial_history)

        self.queue = EventQueue()
        self.psm = PsmTable(scenario.traffic.psm_capacity)
        self._trace = trace
        self._pid = 0

        self.ledger = MetricsLedger(header=run_header(scenario))
        self.stations = [
            self._make_station(ms_id) for ms_id in range(scenario.mobility.n_stations)
        ]

    # -- construction -----------------------------------------------------

    def _make_station(self, ms_id: int) -> Station:
        seed = self.scenario.run.seed
        rng_mob = station_rng(seed, ms_id, MOBILITY_STREAM)
        rng_traffic = station_rng(seed, ms_id, TRAFFIC_STREAM)
        rng_noise = station_rng(seed, ms_id, NOISE_STREAM)
        mob_cfg = self.scenario.mobility
        if mob_cfg.model is MobilityModel.SCRIPTED:
            walk = mob_cfg.walks[ms_id]
            mobility = scripted_state(
                Position(*walk.start), tuple(Position(x, y) for x, y in walk.waypoints), walk.speed
            )
        else:
            mobility = initial_state(mob_cfg.model, self.arena, self.limits, rng_mob)

        traffic = self.scenario.traffic
        realtime = float(rng_traffic.random()) < REALTIME_SHARE[traffic.preset]
        phase = int(rng_traffic.integers(0, traffic.inter_arrival.micros))
        source = VoipSource(
            ms_id,
            inter_arrival=traffic.inter_arrival,
            deadline=traffic.deadline if realtime else None,
            next_emit=phase,
        )
        if self.scenario.run.initial_association is InitialAssociation.RANDOM:
            ap = int(rng_traffic.integers(0, len(self.ap_positions)))
        else:
            ap = self._strongest_at(mobility.current)
        self.ctx.associate(ap)
        return Station(ms_id, mobility, ap, source, rng_mob, rng_traffic, rng_noise)

    def _strongest_at(self, where: Position) -> int:
        levels = [
            self.budget.rssi(ap, pos, where) for ap, pos in enumerate(self.ap_positions)
        ]
        return int(np.argmax(levels))

    # -- environment offered to schemes -----------------------------------

    @property
    def now(self) -> int:
        return self.queue.now

    def current_ap(self, ms_id: int) -> Optional[int]:
        return self.stations[ms_id].ap

    def rssi(self, ms_id: int, ap: int) -> Dbm:
        st = self.stations[ms_id]
        return self.budget.rssi(ap, self.ap_positions[ap], st.position, st.rng_noise)

    def heard_on_channel(self, ms_id: int, channel: int) -> list[tuple[int, Dbm]]:
        heard = []
        for ap in self.aps_on_channel.get(channel, ()):
            level = self.rssi(ms_id, ap)
            if level > self.rx_sensitivity:
                heard.append((ap, level))
        return heard

    def access_delay(self, ms_id: int, ap: int) -> Duration:
        return medium_access_delay(self.load, self.stations[ms_id].rng_traffic, self.contention)

    def spawn(
        self,
        ms_id: int,
        procedure: Procedure,
        on_done: Callable[[Any, list[tuple[str, int]]], None],
    ) -> Process:
        self._pid += 1
        proc = Process(self._pid, ms_id, procedure, on_done)
        self._step(proc)
        return proc

    def set_timer(self, ms_id: int, at: int, token: int) -> None:
        self.queue.push(at, EventKind.TIMER, ms_id, token)

    def begin_handoff(self, ms_id: int) -> None:
        st = self.stations[ms_id]
        st.in_handoff = True
        self._emit_trace("handoff_start", ms_id, st.ap, "")

    def end_handoff(self, ms_id: int, record: Optional[HandoffRecord]) -> None:
        st = self.stations[ms_id]
        st.in_handoff = False
        st.disconnected = False
        if record is None:
            self._emit_trace("handoff_abort", ms_id, st.ap, "")
            return
        if record.component_total != record.latency.micros:
            raise RoamingError(
                f"MS {ms_id}: handoff components sum to {record.component_total} us "
                f"but the handoff took {record.latency.micros} us"
            )
        for _ in self.psm.discard(st.ap, ms_id):
            self._lose(ms_id, st.ap, "handoff_loss")
        record_handoff(self.ctx, st.ap, record.to_ap)
        st.ap = record.to_ap
        self.ledger.add_record(record)
        logger.debug(
            "MS %d: %s handoff %s -> %d in %s",
            ms_id,
            record.form.value,
            record.from_ap,
            record.to_ap,
            record.latency,
        )
        self._emit_trace(
            "handoff_done",
            ms_id,
            record.to_ap,
            f"form={record.form.value};from={record.from_ap};"
            f"latency_us={record.latency.micros};interrupted={int(record.interrupted_prescan)}",
        )

    def try_associate(self, ms_id: int, ap: int) -> bool:
        accepted = (
            self.rssi(ms_id, ap) > self.rx_sensitivity
            and self.ctx.associations[ap] < self.ctx.capacity
        )
        if not accepted:
            self._emit_trace("association_refused", ms_id, ap, "")
        return bool(accepted)

    def psm_enter(self, ms_id: int) -> None:
        st = self.stations[ms_id]
        psm_enter(self.psm, st.ap, ms_id, self.now)
        self._emit_trace("psm_enter", ms_id, st.ap, "")

    def psm_flush(self, ms_id: int) -> None:
        st = self.stations[ms_id]
        result = psm_flush(
            self.psm,
            st.ap,
            ms_id,
            self.now,
            lambda: self.access_delay(ms_id, st.ap),
            st.source.deadline,
        )
        flushed = sorted(result.delivered + result.deadline_drops, key=lambda item: item[1])
        for packet, at in flushed:
            self.queue.push(at, EventKind.DELIVER, ms_id, (packet, st.ap))
        self._emit_trace("psm_flush", ms_id, st.ap, f"packets={len(flushed)}")

    def psm_abandon(self, ms_id: int) -> None:
        st = self.stations[ms_id]
        lost = self.psm.discard(st.ap, ms_id)
        for _ in lost:
            self._lose(ms_id, st.ap, "handoff_loss")
        self._emit_trace("psm_abandon", ms_id, st.ap, f"packets={len(lost)}")

    def note_disconnected(self, ms_id: int) -> None:
        st = self.stations[ms_id]
        st.disconnected = True
        self.ledger.count("disconnections")
        logger.warning("MS %d found no usable AP at %d us; retrying", ms_id, self.now)
        self._emit_trace("disconnected", ms_id, None, "")

    def count(self, name: str, ms_id: Optional[int] = None) -> None:
        self.ledger.count(name)

    # -- event loop -------------------------------------------------------

    def run(self) -> MetricsLedger:
        header = self.ledger.header
        assert header is not None
        logger.info("starting %s", header.render())
        self.queue.push(0, EventKind.TICK)
        for st in self.stations:
            st.scheme = SCHEMES[self.kind](st.ms_id, self, self.policy)
            st.scheme.start()
            self.queue.push(st.source.next_emit, EventKind.EMIT, st.ms_id)

        handlers = {
            EventKind.TICK: self._on_tick,
            EventKind.EMIT: self._on_emit,
            EventKind.DELIVER: self._on_deliver,
            EventKind.RESUME: self._on_resume,
            EventKind.TIMER: self._on_timer,
        }
        while self.queue and (self.queue.peek_time() or 0) < self.duration:
            event = self.queue.pop()
            handlers[event.kind](event)

        self._finish()
        logger.info(
            "finished %s: %d handoffs, loss %.4f",
            header.run_id,
            self.ledger.handoff_count,
            self.ledger.loss_probability,
        )
        return self.ledger

    def _finish(self) -> None:
        self.ledger.context = self.ctx.snapshot()
        for event in self.queue.pending():
            if event.kind is EventKind.DELIVER and event.ms_id is not None:
                self.ledger.packet(event.ms_id, "in_flight")
        for ms_id, queued in sorted(self.psm.backlog().items()):
            self.ledger.packet(ms_id, "in_flight", queued)
        self._emit_trace("run_end", None, None, f"in_flight={self.ledger.packets.in_flight}")

    def _on_tick(self, event: Event) -> None:
        now = event.time
        if now > 0:
            for st in self.stations:
                st.mobility = advance(
                    st.mobility,
                    self.tick,
                    now - self.tick.micros,
                    self.arena,
                    self.limits,
                    st.rng_mobility,
                )
        for st in self.stations:
            assert st.scheme is not None
            st.scheme.on_rssi(self.rssi(st.ms_id, st.ap))
        self.queue.push(now + self.tick.micros, EventKind.TICK)

    def _on_emit(self, event: Event) -> None:
        assert event.ms_id is not None
        st = self.stations[event.ms_id]
        packet = next_packet(st.source, event.time)
        if packet is None:
            return
        self.ledger.packet(st.ms_id, "emitted")
        self._emit_trace("emit", st.ms_id, st.ap, f"seq={packet.seq}")
        self._route(st, packet)
        self.queue.push(st.source.next_emit, EventKind.EMIT, st.ms_id)

    def _route(self, st: Station, packet: Packet) -> None:
        if st.in_handoff:
            self._lose(st.ms_id, st.ap, "handoff_loss", packet)
        elif self.psm.is_dozing(st.ap, st.ms_id):
            evicted = self.psm.buffer(st.ap, st.ms_id).offer(packet)
            if evicted is not None:
                self._lose(st.ms_id, st.ap, "buffer_drop", evicted)
        else:
            at = self.now + self.access_delay(st.ms_id, st.ap).micros
            self.queue.push(at, EventKind.DELIVER, st.ms_id, (packet, st.ap))

    def _on_deliver(self, event: Event) -> None:
        assert event.ms_id is not None
        st = self.stations[event.ms_id]
        packet, ap = event.payload
        if st.in_handoff or ap != st.ap:
            self._lose(st.ms_id, ap, "handoff_loss", packet)
            return
        if self.psm.is_dozing(ap, st.ms_id):
            evicted = self.psm.buffer(ap, st.ms_id).offer(packet)
            if evicted is not None:
                self._lose(st.ms_id, ap, "buffer_drop", evicted)
            return
        if misses_deadline(packet, event.time, st.source.deadline):
            self._lose(st.ms_id, ap, "deadline_drop", packet)
            return
        self.ledger.delivered(st.ms_id, event.time, packet.realtime)
        self._emit_trace(
            "deliver", st.ms_id, ap, f"seq={packet.seq};rt={int(packet.realtime)}"
        )

    def _lose(
        self, ms_id: int, ap: Optional[int], kind: str, packet: Optional[Packet] = None
    ) -> None:
        self.ledger.packet(ms_id, _FATES[kind])
        self._emit_trace(kind, ms_id, ap, f"seq={packet.seq}" if packet is not None else "")

    def _on_resume(self, event: Event) -> None:
        proc: Process = event.payload
        if not proc.alive:
            return
        hold = proc.hold
        assert hold is not None
        proc.log.append((hold.label, hold.delay))
        detail = f"delay_us={hold.delay}"
        if hold.channel is not None:
            detail += f";channel={hold.channel}"
        self._emit_trace(hold.label, proc.ms_id, hold.ap, detail)
        self._step(proc)

    def _step(self, proc: Process) -> None:
        try:
            hold = proc.generator.send(None)
        except StopIteration as stop:
            proc.alive = False
            proc.hold = None
            proc.on_done(stop.value, proc.log)
            return
        proc.hold = hold
        self.queue.push(self.now + hold.delay, EventKind.RESUME, proc.ms_id, proc)

    def _on_timer(self, event: Event) -> None:
        assert event.ms_id is not None
        scheme = self.stations[event.ms_id].scheme
        assert scheme is not None
        scheme.on_timer(int(event.payload))

    def _emit_trace(self, kind: str, ms_id: Optional[int], ap: Optional[int], detail: str) -> None:
        if self._trace is not None:
            self._trace(self.now, kind, ms_id, ap, detail)


def run(scenario: Scenario, trace: Optional[TraceSink] = None) -> MetricsLedger:
    """Execute ``scenario`` up to its duration and return the filled ledger."""
    return Simulation(scenario, trace=trace).run()
