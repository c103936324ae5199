from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from infra.experiments.export import TraceWriter, csv_row, export_context, trace_path_for
from roaming import engine
from roaming.config import Scenario
from roaming.metrics import MetricsLedger
from roaming.schemes.base import HandoffForm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSpec:
    scenario: Scenario
    trace_path: Optional[Path] = None
    context_path: Optional[Path] = None


@dataclass
class SweepResult:
    ledgers: list[MetricsLedger] = field(default_factory=list)
    rows: list[dict[str, str]] = field(default_factory=list)
    summary: list[dict[str, Any]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def execute(spec: RunSpec) -> MetricsLedger:
    """Run one scenario, writing its trace / context files when asked to."""
    if spec.trace_path is None:
        ledger = engine.run(spec.scenario)
    else:
        with TraceWriter(spec.trace_path, engine.run_header(spec.scenario)) as writer:
            ledger = engine.run(spec.scenario, trace=writer)
    if spec.context_path is not None and ledger.context is not None:
        export_context(ledger.context, spec.context_path)
    return ledger


def plan_runs(
    template: Scenario,
    loads: Sequence[float],
    seeds: Sequence[int],
    *,
    trace: Optional[Path] = None,
    context: Optional[Path] = None,
) -> list[RunSpec]:
    """One RunSpec per (load, seed), sorted by load then seed."""
    for load in loads:
        if not 0.0 <= load <= 1.0:
            raise ValueError(f"traffic load must lie in [0, 1], got {load}")
    pairs = sorted({(float(load), int(seed)) for load in loads for seed in seeds})
    several = len(pairs) > 1
    specs = []
    for load, seed in pairs:
        scenario = template.with_overrides(load=load, seed=seed)
        run_id = engine.run_header(scenario).run_id
        specs.append(
            RunSpec(
                scenario,
                trace_path=trace_path_for(trace, run_id, several) if trace else None,
                context_path=trace_path_for(context, run_id, several) if context else None,
            )
        )
    return specs


def sweep(
    template: Scenario,
    loads: Sequence[float],
    seeds: Sequence[int],
    *,
    workers: int = 1,
    trace: Optional[Path] = None,
    context: Optional[Path] = None,
) -> SweepResult:
    """Run every (load, seed) pair of ``template``; rows come back sorted by (load, seed)."""
    specs = plan_runs(template, loads, seeds, trace=trace, context=context)
    result = SweepResult()
    if not specs:
        return result
    logger.info("sweeping %d run(s) with %d worker(s)", len(specs), workers)
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map keeps submission order, so the output order does not depend on scheduling
            result.ledgers = list(pool.map(execute, specs))
    else:
        result.ledgers = [execute(spec) for spec in specs]

    result.rows = [csv_row(ledger) for ledger in result.ledgers]
    result.summary = summarize(result.ledgers)
    for ledger in result.ledgers:
        if not ledger.conservation_holds():
            assert ledger.header is not None
            result.warnings.append(f"packet conservation does not hold for {ledger.header.run_id}")
        disconnections = ledger.counters.get("disconnections", 0)
        if disconnections:
            assert ledger.header is not None
            result.warnings.append(
                f"{ledger.header.run_id}: {disconnections} scan(s) found no usable AP"
            )
    return result


def summarize(ledgers: Sequence[MetricsLedger]) -> list[dict[str, Any]]:
    """Per-load aggregates pooled over every run at that load."""
    by_load: dict[float, list[MetricsLedger]] = {}
    for ledger in ledgers:
        assert ledger.header is not None
        by_load.setdefault(ledger.header.load, []).append(ledger)

    rows = []
    for load in sorted(by_load):
        group = by_load[load]
        latencies = np.concatenate([lg.latencies_us() for lg in group])
        handoffs = int(latencies.size)
        counts = {form: sum(lg.form_counts()[form] for lg in group) for form in HandoffForm}
        emitted = sum(lg.packets.emitted for lg in group)
        lost = sum(lg.packets.deadline_drops + lg.packets.handoff_losses for lg in group)
        rows.append(
            {
                "load": load,
                "runs": len(group),
                "handoffs": handoffs,
                "mean_latency_us": float(np.mean(latencies)) if handoffs else 0.0,
                "form_fractions": {
                    form.value: (counts[form] / handoffs if handoffs else 0.0)
                    for form in HandoffForm
                },
                "loss_probability": lost / emitted if emitted else 0.0,
                "max_inter_frame_us": max(lg.inter_frame_stats()["max"] for lg in group),
            }
        )
    return rows
