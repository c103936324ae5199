from __future__ import annotations

import csv
import io
from pathlib import Path
from types import TracebackType
from typing import IO, Any, Optional, Union

import yaml

from infra.experiments.config import CSV_COLUMNS, CSV_SCHEMA_VERSION
from roaming.metrics import MetricsLedger, RunHeader
from roaming.schemes.base import HandoffForm
from roaming.selection import NeighborContext


def _fixed(value: float, digits: int) -> str:
    # locale-independent fixed point
    return format(value, f".{digits}f")


def csv_row(ledger: MetricsLedger) -> dict[str, str]:
    """One CSV row for one run; every field already rendered as text."""
    header = ledger.header
    if header is None:
        raise ValueError("a ledger without a run header cannot be exported")
    stats = ledger.latency_stats()
    gaps = ledger.inter_frame_stats()
    forms = ledger.form_counts()
    p = ledger.packets
    return {
        "schema_version": str(CSV_SCHEMA_VERSION),
        "run_id": header.run_id,
        "seed": str(header.seed),
        "load": repr(header.load),
        "scheme": header.scheme,
        "selection": header.selection,
        "handoffs": str(ledger.handoff_count),
        "form1": str(forms[HandoffForm.FORM1]),
        "form2": str(forms[HandoffForm.FORM2]),
        "form3": str(forms[HandoffForm.FORM3]),
        "mean_latency_us": _fixed(stats["mean"], 3),
        "median_latency_us": _fixed(stats["median"], 3),
        "p95_latency_us": _fixed(stats["p95"], 3),
        "loss_probability": _fixed(ledger.loss_probability, 9),
        "max_inter_frame_us": _fixed(gaps["max"], 3),
        "p95_inter_frame_us": _fixed(gaps["p95"], 3),
        "emitted": str(p.emitted),
        "delivered": str(p.delivered),
        "dropped": str(p.deadline_drops + p.buffer_drops + p.handoff_losses),
    }


def render_csv(rows: list[dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(rows: list[dict[str, str]], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(render_csv(rows))


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def trace_path_for(base: Union[str, Path], run_id: str, several: bool) -> Path:
    """``base`` itself for a single run, ``<stem>-<run_id><suffix>`` otherwise."""
    base = Path(base)
    if not several:
        return base
    return base.with_name(f"{base.stem}-{run_id}{base.suffix}")


class TraceWriter:
    """Writes ``time_us,event_kind,ms_id,ap_id,detail`` lines after a '#' run header."""

    def __init__(self, path: Union[str, Path], header: RunHeader) -> None:
        self.path = Path(path)
        self.header = header
        self._file: Optional[IO[str]] = None

    def __enter__(self) -> "TraceWriter":
        self._file = open(self.path, "w", encoding="utf-8", newline="\n")
        self._file.write(f"# {self.header.render()}\n")
        return self

    def __exit__(
        self,
        exc_type: Optional[type[BaseException]],
        exc: Optional[BaseException],
        tb: Optional[TracebackType],
    ) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def __call__(
        self, time_us: int, kind: str, ms_id: Optional[int], ap_id: Optional[int], detail: str
    ) -> None:
        assert self._file is not None, "TraceWriter used outside its context"
        ms = "" if ms_id is None else str(ms_id)
        ap = "" if ap_id is None else str(ap_id)
        self._file.write(f"{time_us},{kind},{ms},{ap},{detail}\n")


def export_context(
    ctx: Union[NeighborContext, dict[str, Any]], path: Union[str, Path]
) -> None:
    """Write a neighbor context (or its snapshot) as YAML for offline inspection."""
    snapshot = ctx.snapshot() if isinstance(ctx, NeighborContext) else ctx
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(snapshot, f, sort_keys=True, default_flow_style=None)
