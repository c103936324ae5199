"""
Offline replay of a trace file.

The replay rebuilds a ledger from the trace lines alone (handoff records with
their components, packet fates, the in-flight count at the end) and renders
it through the same ``csv_row`` as a live run.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from infra.experiments.export import csv_row
from roaming.metrics import MetricsLedger, RunHeader
from roaming.schemes.base import HandoffForm, HandoffRecord

_PACKET_FATES = {
    "emit": "emitted",
    "deadline_drop": "deadline_drops",
    "buffer_drop": "buffer_drops",
    "handoff_loss": "handoff_losses",
}


def _fields(detail: str) -> dict[str, str]:
    out = {}
    for part in detail.split(";"):
        if "=" in part:
            key, value = part.split("=", 1)
            out[key] = value
    return out


def parse_header(line: str) -> RunHeader:
    if not line.startswith("#"):
        raise ValueError("trace does not start with a '#' run header")
    kv = dict(token.split("=", 1) for token in line[1:].split() if "=" in token)
    width, height = kv["arena"].split("x")
    return RunHeader(
        seed=int(kv["seed"]),
        scheme=kv["scheme"],
        selection=kv["selection"],
        load=float(kv["load"]),
        tx_power_dbm=float(kv["tx_power_dbm"]),
        arena=(float(width), float(height)),
        n_aps=int(kv["aps"]),
        n_stations=int(kv["stations"]),
        duration_us=int(kv["duration_us"]),
    )


def replay_ledger(path: Union[str, Path]) -> MetricsLedger:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trace")
    ledger = MetricsLedger(header=parse_header(lines[0]))
    # holds completed by each MS since its current handoff started
    open_handoffs: dict[int, list[tuple[str, int]]] = {}

    for raw in lines[1:]:
        time_s, kind, ms_s, ap_s, detail = raw.split(",", 4)
        time = int(time_s)
        ms: Optional[int] = int(ms_s) if ms_s else None
        if kind in _PACKET_FATES:
            assert ms is not None
            ledger.packet(ms, _PACKET_FATES[kind])
        elif kind == "deliver":
            assert ms is not None
            ledger.delivered(ms, time, _fields(detail).get("rt") == "1")
        elif kind == "handoff_start":
            assert ms is not None
            open_handoffs[ms] = []
        elif kind == "handoff_abort":
            assert ms is not None
            open_handoffs.pop(ms, None)
        elif kind == "handoff_done":
            assert ms is not None
            f = _fields(detail)
            latency = int(f["latency_us"])
            ledger.add_record(
                HandoffRecord(
                    ms_id=ms,
                    from_ap=int(f["from"]) if f["from"] != "None" else None,
                    to_ap=int(ap_s),
                    form=HandoffForm(f["form"]),
                    trigger_time=time - latency,
                    complete_time=time,
                    components=tuple(open_handoffs.pop(ms, [])),
                    interrupted_prescan=f.get("interrupted") == "1",
                )
            )
        elif kind == "run_end":
            ledger.packets.in_flight = int(_fields(detail)["in_flight"])
        elif detail.startswith("delay_us=") and ms is not None and ms in open_handoffs:
            open_handoffs[ms].append((kind, int(_fields(detail)["delay_us"])))
    return ledger


def replay_trace(path: Union[str, Path]) -> dict[str, str]:
    """Recompute the CSV row of the run that wrote ``path``."""
    return csv_row(replay_ledger(path))
