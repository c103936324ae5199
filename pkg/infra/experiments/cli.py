from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from infra.experiments.config import (
    DEFAULT_LOADS,
    DEFAULT_WORKERS,
    EXIT_CHECK_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_OK,
    REFERENCE_SCENARIO,
)
from infra.experiments.evaluators import run_formula_checks
from infra.experiments.export import render_csv, write_csv
from infra.experiments.runner import SweepResult, sweep
from infra.experiments.scenarios import parse_config
from roaming.config import Scenario
from roaming.errors import ConfigError
from roaming.latency import Duration

logger = logging.getLogger(__name__)

# stdout carries the CSV; everything for humans goes to stderr
console = Console(stderr=True)

app = typer.Typer(add_completion=False, help="802.11 handoff simulator.")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def parse_seeds(text: str) -> list[int]:
    """``"1..10"`` (inclusive) or ``"1,4,9"``."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo > hi:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    seeds = [int(part) for part in text.split(",") if part.strip()]
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def parse_loads(text: str) -> list[float]:
    """Comma-separated loads, or ``"grid"`` for 0.1 to 0.9 in steps of 0.1."""
    if text.strip().lower() == "grid":
        return list(DEFAULT_LOADS)
    loads = [float(part) for part in text.split(",") if part.strip()]
    if not loads:
        raise ValueError("no loads given")
    for load in loads:
        if not 0.0 <= load <= 1.0:
            raise ValueError(f"traffic load must lie in [0, 1], got {load}")
    return loads


def _fail(message: str, code: int) -> typer.Exit:
    console.print(f"[bold red]error:[/bold red] {message}")
    return typer.Exit(code)


def _print_checks() -> bool:
    results = run_formula_checks()
    table = Table(title="Formula checks")
    table.add_column("Check", style="cyan")
    table.add_column("Result")
    table.add_column("Detail", style="dim")
    for r in results:
        table.add_row(r["key"], "[green]ok[/green]" if r["score"] else "[red]FAIL[/red]", r["comment"])
    console.print(table)
    return all(r["score"] for r in results)


def _print_summary(result: SweepResult) -> None:
    table = Table(title="Per-load summary")
    table.add_column("Load", justify="right")
    table.add_column("Runs", justify="right")
    table.add_column("Handoffs", justify="right")
    table.add_column("Mean latency (ms)", justify="right")
    table.add_column("Form 1/2/3", justify="right")
    table.add_column("Loss", justify="right")
    table.add_column("Max gap (ms)", justify="right")
    for row in result.summary:
        fr = row["form_fractions"]
        table.add_row(
            f"{row['load']:g}",
            str(row["runs"]),
            str(row["handoffs"]),
            f"{row['mean_latency_us'] / 1000:.3f}",
            f"{fr['form1']:.2f}/{fr['form2']:.2f}/{fr['form3']:.2f}",
            f"{row['loss_probability']:.4%}",
            f"{row['max_inter_frame_us'] / 1000:.1f}",
        )
    console.print(table)
    if result.warnings:
        console.print(Panel.fit("\n".join(result.warnings), title="Warnings", border_style="yellow"))


@app.command()
def main(
    config: Path = typer.Option(
        REFERENCE_SCENARIO, "--config", "-c", help="Scenario YAML file."
    ),
    scheme: Optional[str] = typer.Option(
        None, "--scheme", help="standard_active, standard_passive, apfh or pshp."
    ),
    selection: Optional[str] = typer.Option(
        None, "--selection", help="AP selection heuristic: weighted_sum, lexicographic, rssi_only or none."
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed of a single run."),
    seeds: Optional[str] = typer.Option(
        None, "--seeds", help="Seed sweep, '1..10' or '1,2,3'. Wins over --seed."
    ),
    loads: Optional[str] = typer.Option(
        None, "--loads", help="Comma-separated traffic loads in [0, 1], or 'grid'."
    ),
    duration: Optional[float] = typer.Option(
        None, "--duration", min=0.0, help="Simulated seconds per run."
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="CSV output file (stdout when absent)."
    ),
    trace: Optional[Path] = typer.Option(
        None, "--trace", help="Event trace file; one per run when sweeping."
    ),
    export_context: Optional[Path] = typer.Option(
        None, "--export-context", help="Write the end-of-run neighbor context as YAML."
    ),
    check: bool = typer.Option(
        False, "--check", help="Verify the timing and radio formulas, then exit."
    ),
    workers: int = typer.Option(
        DEFAULT_WORKERS, "--workers", min=1, help="Worker processes for sweeps."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging."),
) -> None:
    """
    Simulate handoffs for a scenario and write one CSV row per (load, seed).
    """
    _setup_logging(verbose)

    if check:
        if not _print_checks():
            raise typer.Exit(EXIT_CHECK_FAILED)
        raise typer.Exit(EXIT_OK)

    try:
        template: Scenario = parse_config(config)
        template = template.with_overrides(
            scheme=scheme,
            selection=selection,
            seed=seed,
            duration=Duration.seconds(duration) if duration is not None else None,
        )
        seed_list = parse_seeds(seeds) if seeds else [template.run.seed]
        load_list = parse_loads(loads) if loads else [template.traffic.load]
    except ConfigError as e:
        raise _fail(str(e), EXIT_CONFIG_ERROR) from e
    except (ValidationError, ValueError, OverflowError) as e:
        raise _fail(f"invalid option: {e}", EXIT_CONFIG_ERROR) from e
    except OSError as e:
        raise _fail(f"cannot read {config}: {e.strerror or e}", EXIT_IO_ERROR) from e

    try:
        result = sweep(
            template,
            load_list,
            seed_list,
            workers=workers,
            trace=trace,
            context=export_context,
        )
        if out is not None:
            write_csv(result.rows, out)
        else:
            typer.echo(render_csv(result.rows), nl=False)
    except OSError as e:
        raise _fail(f"I/O failure: {e}", EXIT_IO_ERROR) from e

    _print_summary(result)


if __name__ == "__main__":
    app()
