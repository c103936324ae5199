from __future__ import annotations

import pytest

from roaming.latency import Duration, TimingParams
from roaming.schemes.apfh import Apfh
from roaming.schemes.base import HandoffForm, Hold, active_scan, passive_scan
from roaming.schemes.standard import StandardActive, StandardPassive
from tests.unit.conftest import FakeEnv

pytestmark = pytest.mark.unit

ACTIVE_SCAN_US = 11 * 12_000 + 2 * 4_000


def labels(record):
    return [label for label, _ in record.components]


def test_hold_rejects_negative_delay():
    with pytest.raises(ValueError):
        Hold(-1, "oops")


def _run(procedure):
    holds = []
    try:
        hold = procedure.send(None)
        while True:
            holds.append(hold)
            hold = procedure.send(None)
    except StopIteration as stop:
        return holds, stop.value


class TestScans:
    def test_active_scan_extends_only_where_answered(self, two_cells):
        holds, outcome = _run(active_scan(two_cells(), 0))
        assert sum(h.delay for h in holds) == ACTIVE_SCAN_US
        assert [h.channel for h in holds if h.label == "probe_extend"] == [0, 1]
        assert outcome.items() == [(0, -52.0), (1, -40.0)]

    def test_active_scan_without_extension(self):
        timing = TimingParams(min_channel_time=Duration.ms(11), max_channel_time=Duration.ms(11))
        env = FakeEnv({1: [(1, -40.0)]}, timing=timing)
        holds, _ = _run(active_scan(env, 0))
        assert {h.label for h in holds} == {"probe_min"}

    def test_passive_scan_dwells_a_beacon_interval(self, two_cells):
        holds, outcome = _run(passive_scan(two_cells(), 0))
        assert sum(h.delay for h in holds) == 11 * 105_000
        assert not outcome.empty


class TestStandard:
    def test_no_handoff_above_threshold(self, two_cells):
        env = two_cells()
        scheme = StandardActive(0, env)
        scheme.on_rssi(-50.0)
        env.drive()
        assert env.records == []

    def test_active_handoff_latency(self, two_cells):
        env = two_cells()
        scheme = StandardActive(0, env)
        scheme.on_rssi(-52.0)
        assert scheme.in_handoff
        env.drive()
        (record,) = env.records
        assert record.form is HandoffForm.BASELINE
        assert (record.from_ap, record.to_ap) == (0, 1)
        assert record.latency == Duration.us(ACTIVE_SCAN_US + 4_000)
        assert labels(record)[-4:] == ["auth_frame", "auth_frame", "assoc_frame", "assoc_frame"]
        assert not scheme.in_handoff

    def test_samples_during_a_handoff_are_ignored(self, two_cells):
        env = two_cells()
        scheme = StandardActive(0, env)
        scheme.on_rssi(-52.0)
        scheme.on_rssi(-60.0)
        env.drive()
        assert len(env.records) == 1

    def test_passive_handoff_latency(self, two_cells):
        env = two_cells()
        StandardPassive(0, env).on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert record.latency == Duration.us(11 * 105_000 + 6_000 + 4_000)
        assert "probe_selected" in labels(record)

    def test_refusal_triggers_rescan(self, two_cells):
        env = two_cells()
        env.refuse_once.add(1)
        StandardActive(0, env).on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert env.counters["association_refusals"] == 1
        assert labels(record).count("probe_min") == 22
        assert record.latency == Duration.us(2 * (ACTIVE_SCAN_US + 4_000))

    def test_empty_scan_backs_off_and_retries(self):
        env = FakeEnv({0: [(0, -52.0)]})

        def ap_appears():
            env.heard[2] = [(2, -45.0)]

        env.on_disconnect = ap_appears
        StandardActive(0, env).on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert record.to_ap == 2
        assert env.counters["disconnections"] == 1
        assert "retry_backoff" in labels(record)

    def test_heuristic_choice(self, two_cells):
        from roaming.selection import SelectionPolicy

        env = FakeEnv({0: [(0, -52.0)], 1: [(1, -40.0)], 2: [(2, -42.0)]})
        env.ctx.seed_history([(0, 2, 9)])
        StandardActive(0, env, SelectionPolicy(w_cnx=2.0)).on_rssi(-52.0)
        env.drive()
        assert env.records[0].to_ap == 2


class TestApfh:
    def test_tracked_neighbor_skips_discovery(self, two_cells):
        env = two_cells()
        apfh = Apfh(0, env)
        apfh.on_rssi(-48.0)
        apfh.on_rssi(-48.0)
        assert apfh.best_tracked() == 1
        apfh.on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert record.latency == Duration.ms(4)
        assert labels(record) == ["auth_frame", "auth_frame", "assoc_frame", "assoc_frame"]
        assert apfh.tracked == {}

    def test_safe_zone_forgets_tracked_aps(self, two_cells):
        apfh = Apfh(0, two_cells())
        apfh.on_rssi(-48.0)
        apfh.on_rssi(-48.0)
        apfh.on_rssi(-40.0)
        assert apfh.tracked == {}

    def test_current_ap_is_never_tracked(self, two_cells):
        apfh = Apfh(0, two_cells())
        apfh.on_rssi(-48.0)
        assert apfh.tracked == {}

    def test_nothing_tracked_falls_back_to_full_scan(self, two_cells):
        env = two_cells()
        Apfh(0, env).on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert env.counters["apfh_fallbacks"] == 1
        assert record.latency == Duration.us(ACTIVE_SCAN_US + 4_000)

    def test_refused_tracked_ap_falls_back(self, two_cells):
        env = two_cells()
        env.refuse_once.add(1)
        apfh = Apfh(0, env)
        apfh.on_rssi(-48.0)
        apfh.on_rssi(-48.0)
        apfh.on_rssi(-52.0)
        env.drive()
        (record,) = env.records
        assert env.counters["apfh_fallbacks"] == 1
        assert record.latency == Duration.us(4_000 + ACTIVE_SCAN_US + 4_000)


def test_base_scheme_counts_stray_timers(two_cells):
    env = two_cells()
    StandardActive(0, env).on_timer(3)
    assert env.counters["ignored_timers"] == 1
