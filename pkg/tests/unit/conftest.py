from __future__ import annotations

from collections import Counter
from typing import Any, Callable, Optional

import pytest

from roaming.latency import Duration, TimingParams, prescan_period_alpha
from roaming.propagation import Dbm, Thresholds
from roaming.schemes.base import HandoffRecord, Procedure
from roaming.selection import NeighborContext


class FakeProcess:
    def __init__(self, generator: Procedure, on_done: Callable[[Any, list], None]) -> None:
        self.generator = generator
        self.on_done = on_done
        self.alive = True
        self.log: list[tuple[str, int]] = []

    def cancel(self) -> None:
        if self.alive:
            self.alive = False
            self.generator.close()


class FakeEnv:
    """Scheme environment with a hand-set radio picture and a manual clock.

    ``heard`` maps a channel to the (AP, RSSI) pairs answering on it. Spawned
    procedures only run when ``drive()`` is called.
    """

    def __init__(
        self,
        heard: dict[int, list[tuple[int, Dbm]]],
        *,
        current: int = 0,
        timing: Optional[TimingParams] = None,
        ctx: Optional[NeighborContext] = None,
    ) -> None:
        self.timing = timing or TimingParams()
        self.thresholds = Thresholds.from_prescan(-51.0, -45.0)
        self.ctx = ctx or NeighborContext({0: {1, 2}, 1: {0}, 2: {0}}, n_aps=3)
        self.alpha = prescan_period_alpha(self.timing)
        self.now = 0
        self.ap: int = current
        self.heard = heard
        self.refuse_once: set[int] = set()
        self.on_disconnect: Optional[Callable[[], None]] = None
        self.records: list[HandoffRecord] = []
        self.aborts = 0
        self.counters: Counter[str] = Counter()
        self.timers: list[tuple[int, int]] = []
        self.psm: list[str] = []
        self.in_handoff = False
        self._ready: list[FakeProcess] = []

    # -- SchemeEnv --------------------------------------------------------

    def current_ap(self, ms_id: int) -> Optional[int]:
        return self.ap

    def rssi(self, ms_id: int, ap: int) -> Dbm:
        for pairs in self.heard.values():
            for heard_ap, level in pairs:
                if heard_ap == ap:
                    return level
        return -100.0

    def heard_on_channel(self, ms_id: int, channel: int) -> list[tuple[int, Dbm]]:
        return list(self.heard.get(channel, []))

    def access_delay(self, ms_id: int, ap: int) -> Duration:
        return Duration.ms(1)

    def spawn(self, ms_id: int, procedure: Procedure, on_done) -> FakeProcess:
        proc = FakeProcess(procedure, on_done)
        self._ready.append(proc)
        return proc

    def set_timer(self, ms_id: int, at: int, token: int) -> None:
        self.timers.append((at, token))

    def begin_handoff(self, ms_id: int) -> None:
        self.in_handoff = True
        self._trigger = self.now

    def end_handoff(self, ms_id: int, record: Optional[HandoffRecord]) -> None:
        self.in_handoff = False
        if record is None:
            self.aborts += 1
            return
        assert record.component_total == record.latency.micros
        self.records.append(record)
        self.ap = record.to_ap

    def try_associate(self, ms_id: int, ap: int) -> bool:
        if ap in self.refuse_once:
            self.refuse_once.discard(ap)
            return False
        return True

    def psm_enter(self, ms_id: int) -> None:
        self.psm.append("enter")

    def psm_flush(self, ms_id: int) -> None:
        self.psm.append("flush")

    def psm_abandon(self, ms_id: int) -> None:
        self.psm.append("abandon")

    def note_disconnected(self, ms_id: int) -> None:
        self.counters["disconnections"] += 1
        if self.on_disconnect is not None:
            self.on_disconnect()

    def count(self, name: str, ms_id: Optional[int] = None) -> None:
        self.counters[name] += 1

    # -- test driver ------------------------------------------------------

    def drive(self) -> None:
        """Run every spawned procedure to completion, one after the other."""
        while self._ready:
            proc = self._ready.pop(0)
            if not proc.alive:
                continue
            try:
                hold = proc.generator.send(None)
                while True:
                    self.now += hold.delay
                    proc.log.append((hold.label, hold.delay))
                    hold = proc.generator.send(None)
            except StopIteration as stop:
                proc.alive = False
                proc.on_done(stop.value, proc.log)


@pytest.fixture
def two_cells():
    """Current AP 0 on channel 0, a stronger AP 1 on channel 1."""

    def build(**kwargs: Any) -> FakeEnv:
        return FakeEnv({0: [(0, -52.0)], 1: [(1, -40.0)]}, **kwargs)

    return build
