from __future__ import annotations

import numpy as np
import pytest
import yaml

from infra.experiments.config import CSV_COLUMNS
from infra.experiments.export import (
    TraceWriter,
    csv_row,
    export_context,
    read_csv,
    render_csv,
    trace_path_for,
    write_csv,
)
from infra.experiments.replay import parse_header, replay_ledger
from roaming.metrics import MetricsLedger, PacketCounters, RunHeader
from roaming.schemes.base import HandoffForm, HandoffRecord
from roaming.selection import NeighborContext

pytestmark = pytest.mark.unit

HEADER = RunHeader(
    seed=3,
    scheme="pshp",
    selection="none",
    load=0.5,
    tx_power_dbm=-1.25,
    arena=(225.0, 173.2),
    n_aps=25,
    n_stations=100,
    duration_us=60_000_000,
)


def record(latency: int, form: HandoffForm = HandoffForm.FORM1, ms: int = 0) -> HandoffRecord:
    return HandoffRecord(
        ms_id=ms,
        from_ap=0,
        to_ap=1,
        form=form,
        trigger_time=1_000,
        complete_time=1_000 + latency,
        components=(("reassoc_frame", latency),),
    )


def ledger_with(latencies, **packets) -> MetricsLedger:
    ledger = MetricsLedger(header=HEADER)
    for lat in latencies:
        ledger.add_record(record(lat))
    for fate, n in packets.items():
        ledger.packet(0, fate, n)
    return ledger


def test_run_id():
    assert HEADER.run_id == "pshp-none-l0.5-s3"


def test_header_round_trips_through_its_rendering():
    assert parse_header("# " + HEADER.render()) == HEADER


def test_record_cannot_end_before_it_starts():
    with pytest.raises(ValueError):
        HandoffRecord(0, 0, 1, HandoffForm.FORM1, trigger_time=5, complete_time=4)


class TestLedger:
    def test_latency_stats(self):
        stats = ledger_with([1_000, 2_000, 3_000, 10_000]).latency_stats()
        assert stats["mean"] == 4_000.0
        assert stats["median"] == 2_500.0
        assert stats["p95"] == pytest.approx(8_950.0)

    def test_empty_ledger_stats(self):
        ledger = MetricsLedger(header=HEADER)
        assert ledger.latency_stats() == {"mean": 0.0, "median": 0.0, "p95": 0.0}
        assert ledger.loss_probability == 0.0

    def test_loss_excludes_buffer_drops(self):
        ledger = ledger_with(
            [], emitted=100, delivered=90, deadline_drops=3, handoff_losses=2, buffer_drops=5
        )
        assert ledger.loss_probability == pytest.approx(0.05)
        assert ledger.conservation_holds()

    def test_conservation_detects_a_missing_packet(self):
        assert not ledger_with([], emitted=2, delivered=1).conservation_holds()

    def test_form_fractions(self):
        ledger = ledger_with([1_000, 2_000])
        ledger.add_record(record(5_000, HandoffForm.FORM3))
        fractions = ledger.form_fractions()
        assert fractions[HandoffForm.FORM1] == pytest.approx(2 / 3)
        assert fractions[HandoffForm.FORM3] == pytest.approx(1 / 3)
        assert fractions[HandoffForm.FORM2] == 0.0

    def test_inter_frame_delays(self):
        ledger = MetricsLedger(header=HEADER)
        for at in (40_000, 0, 20_000):
            ledger.delivered(2, at, realtime=True)
        ledger.delivered(2, 99_000, realtime=False)
        assert ledger.inter_frame_delays(2).tolist() == [20_000, 20_000]

    def test_inter_frame_stats_pool_every_station(self):
        ledger = MetricsLedger(header=HEADER)
        for ms_id, times in {0: (0, 20_000, 40_000), 1: (5_000, 75_000)}.items():
            for at in times:
                ledger.delivered(ms_id, at, realtime=True)
        stats = ledger.inter_frame_stats()
        assert stats["max"] == 70_000.0
        assert stats["p95"] == pytest.approx(np.percentile([20_000, 20_000, 70_000], 95))

    def test_inter_frame_stats_without_deliveries(self):
        assert MetricsLedger(header=HEADER).inter_frame_stats() == {"max": 0.0, "p95": 0.0}

    def test_digest_tracks_content(self):
        a, b = ledger_with([1_000]), ledger_with([1_000])
        assert a.digest() == b.digest()
        b.count("ignored_events")
        assert a.digest() != b.digest()

    def test_counters_balance(self):
        assert PacketCounters(emitted=3, delivered=1, in_flight=2).balanced()


class TestCsv:
    def test_row_has_every_column_as_text(self):
        row = csv_row(ledger_with([1_000, 3_000], emitted=10, delivered=9, handoff_losses=1))
        assert list(row) == CSV_COLUMNS
        assert all(isinstance(v, str) for v in row.values())
        assert row["mean_latency_us"] == "2000.000"
        assert row["loss_probability"] == "0.100000000"
        assert row["dropped"] == "1"
        assert row["max_inter_frame_us"] == "0.000"
        assert row["load"] == "0.5"

    def test_row_needs_a_header(self):
        with pytest.raises(ValueError):
            csv_row(MetricsLedger())

    def test_write_then_read(self, tmp_path):
        rows = [csv_row(ledger_with([1_000]))]
        path = tmp_path / "out.csv"
        write_csv(rows, path)
        assert read_csv(path) == rows
        assert render_csv(rows).splitlines()[0] == ",".join(CSV_COLUMNS)


@pytest.mark.parametrize(
    ("several", "expected"), [(False, "trace.csv"), (True, "trace-pshp-none-l0.5-s3.csv")]
)
def test_trace_path_for(tmp_path, several, expected):
    assert trace_path_for(tmp_path / "trace.csv", HEADER.run_id, several).name == expected


def test_trace_replays_into_the_same_row(tmp_path):
    path = tmp_path / "run.trace"
    with TraceWriter(path, HEADER) as trace:
        trace(0, "emit", 0, 0, "seq=0")
        trace(500, "handoff_start", 0, 0, "")
        trace(1_500, "reassoc_frame", 0, 1, "delay_us=1000")
        trace(1_700, "deliver", 0, 1, "seq=0;rt=1")
        trace(2_500, "reassoc_frame", 0, 1, "delay_us=1000")
        trace(2_500, "handoff_done", 0, 1, "form=form1;from=0;latency_us=2000;interrupted=0")
        trace(3_000, "emit", 0, 1, "seq=1")
        trace(4_200, "deliver", 0, 1, "seq=1;rt=1")
        trace(5_000, "emit", 0, 1, "seq=2")
        trace(6_000, "deliver", 0, 1, "seq=2;rt=0")
        trace(10_000, "run_end", None, None, "in_flight=1")

    ledger = replay_ledger(path)
    (rec,) = ledger.records
    assert rec.components == (("reassoc_frame", 1_000), ("reassoc_frame", 1_000))
    assert rec.latency.micros == 2_000
    assert ledger.packets == PacketCounters(emitted=3, delivered=3, in_flight=1)
    assert ledger.inter_frame_delays(0).tolist() == [2_500]


def test_trace_writer_requires_its_context(tmp_path):
    writer = TraceWriter(tmp_path / "t", HEADER)
    with pytest.raises(AssertionError):
        writer(0, "emit", 0, 0, "")


def test_export_context(tmp_path):
    ctx = NeighborContext({0: {1}, 1: {0}}, n_aps=2)
    ctx.associate(0)
    path = tmp_path / "ctx.yaml"
    export_context(ctx, path)
    data = yaml.safe_load(path.read_text())
    assert data["associations"] == [1, 0]
    assert data["neighbors"] == {0: [1], 1: [0]}
