from __future__ import annotations

import numpy as np
import pytest

from roaming.engine import (
    MOBILITY_STREAM,
    NOISE_STREAM,
    TRAFFIC_STREAM,
    EventKind,
    EventQueue,
    Simulation,
    run_header,
    station_rng,
)
from roaming.errors import CausalityError
from roaming.schemes.base import Hold

pytestmark = pytest.mark.unit


class TestEventQueue:
    def test_orders_by_time_then_insertion(self):
        q = EventQueue()
        q.push(20, EventKind.TICK)
        first = q.push(10, EventKind.EMIT, 1)
        second = q.push(10, EventKind.EMIT, 0)
        assert [q.pop(), q.pop()] == [first, second]
        assert q.now == 10
        assert q.pop().kind is EventKind.TICK

    def test_refuses_the_past(self):
        q = EventQueue()
        q.push(10, EventKind.TICK)
        q.pop()
        with pytest.raises(CausalityError):
            q.push(9, EventKind.TICK)

    def test_same_time_is_allowed(self):
        q = EventQueue()
        q.push(10, EventKind.TICK)
        q.pop()
        q.push(10, EventKind.TIMER, 0, 1)
        assert q.peek_time() == 10
        assert len(q) == 1


def test_station_streams_are_independent_and_reproducible():
    draws = {
        stream: station_rng(7, 3, stream).random(4).tolist()
        for stream in (MOBILITY_STREAM, TRAFFIC_STREAM, NOISE_STREAM)
    }
    assert len({tuple(v) for v in draws.values()}) == 3
    assert station_rng(7, 3, TRAFFIC_STREAM).random(4).tolist() == draws[TRAFFIC_STREAM]
    assert not np.allclose(station_rng(7, 4, TRAFFIC_STREAM).random(4), draws[TRAFFIC_STREAM])


def test_run_header_describes_the_scenario(small_reference):
    header = run_header(small_reference)
    assert header.run_id == "pshp-none-l0.5-s1"
    assert header.n_aps == 25
    assert header.n_stations == 12
    assert header.duration_us == 4_000_000


def test_stations_start_on_their_strongest_ap(corridor):
    sim = Simulation(corridor)
    assert sim.stations[0].ap == 0
    assert sim.ctx.associations.tolist() == [1, 0]


def test_spawned_procedure_runs_hold_by_hold(single_cell):
    sim = Simulation(single_cell)
    done = []

    def procedure():
        yield Hold(300, "first")
        yield Hold(200, "second")
        return "finished"

    proc = sim.spawn(0, procedure(), lambda value, log: done.append((value, list(log))))
    assert proc.alive
    while sim.queue:
        event = sim.queue.pop()
        if event.kind is EventKind.RESUME:
            sim._on_resume(event)
    assert done == [("finished", [("first", 300), ("second", 200)])]
    assert sim.now == 500


def test_cancelled_procedure_never_resumes(single_cell):
    sim = Simulation(single_cell)
    done = []

    def procedure():
        yield Hold(300, "only")

    proc = sim.spawn(0, procedure(), lambda value, log: done.append(value))
    proc.cancel()
    while sim.queue:
        event = sim.queue.pop()
        if event.kind is EventKind.RESUME:
            sim._on_resume(event)
    assert done == []
    assert not proc.alive
