"""
Self-checks for the closed-form timing and radio formulas (``--check``).

Each check returns an evaluator result ``{"key", "score", "comment"}`` with a
boolean score, so a failing formula names itself in the report.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, List

import numpy as np

from roaming.latency import (
    Duration,
    TimingParams,
    handover_latency,
    min_channel_time_bound,
    prescan_period_alpha,
    prescan_time,
    probe_time_bounds,
    syncscan_delay,
)
from roaming.propagation import (
    SPEED_OF_LIGHT,
    Thresholds,
    Zone,
    classify_zone,
    prevent_threshold,
    received_power,
)
from roaming.traffic import ContentionModel, LoadModel, medium_access_delay

EvaluatorResult = Dict[str, Any]
Check = Callable[[], EvaluatorResult]

DB_TOLERANCE = 1e-9

ms = Duration.ms
us = Duration.us


def _zero_timing() -> TimingParams:
    return TimingParams(
        n_channels=1,
        min_channel_time=us(0),
        max_channel_time=us(0),
        t_switch=us(0),
        difs=us(0),
        cw=0,
        t_auth=us(0),
        t_assoc=us(0),
    )


def _result(key: str, got: Any, expected: Any) -> EvaluatorResult:
    ok = got == expected
    return {"key": key, "score": ok, "comment": f"got {got}, expected {expected}"}


def _close(key: str, got: float, expected: float, tol: float = DB_TOLERANCE) -> EvaluatorResult:
    ok = abs(got - expected) <= tol
    return {"key": key, "score": ok, "comment": f"got {got!r}, expected {expected!r} (tol {tol:g})"}


def check_probe_bounds() -> List[EvaluatorResult]:
    return [
        _result("probe_bounds.zero", probe_time_bounds(_zero_timing()), (us(0), us(0))),
        _result("probe_bounds.n11", probe_time_bounds(TimingParams()), (ms(77), ms(121))),
        _result(
            "probe_bounds.n13",
            probe_time_bounds(TimingParams(n_channels=13)),
            (ms(91), ms(143)),
        ),
    ]


def check_min_channel_time_bound() -> List[EvaluatorResult]:
    return [
        _result("mct_bound.zero", min_channel_time_bound(us(0), 0, us(20)), us(0)),
        _result("mct_bound.dsss", min_channel_time_bound(us(50), 31, us(20)), us(670)),
        _result("mct_bound.ofdm", min_channel_time_bound(us(28), 15, us(9)), us(163)),
    ]


def check_handover_latency() -> List[EvaluatorResult]:
    p = TimingParams()
    return [
        _result("handover_latency.zero", handover_latency(_zero_timing(), us(0)), us(0)),
        _result("handover_latency.min_dwell", handover_latency(p, ms(7)), ms(136)),
        _result("handover_latency.max_dwell", handover_latency(p, ms(11)), ms(180)),
    ]


def check_syncscan_delay() -> List[EvaluatorResult]:
    return [
        _result("syncscan.zero", syncscan_delay(us(0), us(0)), us(0)),
        _result("syncscan.max_dwell", syncscan_delay(ms(5), ms(11)), ms(21)),
        _result("syncscan.beacon", syncscan_delay(us(150), ms(100)), us(100_300)),
    ]


def check_prescan() -> List[EvaluatorResult]:
    n11 = TimingParams()
    n13 = TimingParams(n_channels=13)
    n32 = TimingParams(n_channels=32)
    results = [
        _result("prescan_time.zero", prescan_time(_zero_timing(), us(0)), us(0)),
        _result("prescan_time.n11", prescan_time(n11, ms(11)), ms(176)),
        _result("prescan_time.n13", prescan_time(n13, ms(11)), ms(208)),
        _result("alpha.zero", prescan_period_alpha(_zero_timing()), us(0)),
        _result("alpha.n11", prescan_period_alpha(n11), ms(264)),
        _result("alpha.n32", prescan_period_alpha(n32), ms(768)),
    ]
    for name, p in (("n11", n11), ("n13", n13), ("n32", n32)):
        alpha = prescan_period_alpha(p)
        cycle = prescan_time(p, p.max_channel_time)
        results.append(
            {
                "key": f"alpha_covers_cycle.{name}",
                "score": alpha >= cycle,
                "comment": f"alpha {alpha} vs one cycle {cycle}",
            }
        )
    return results


def check_prevent_threshold() -> List[EvaluatorResult]:
    try:
        prevent_threshold(0.0, 0.0)
        degenerate = {"key": "prevent.degenerate", "score": False, "comment": "(0, 0) accepted"}
    except ValueError as e:
        degenerate = {"key": "prevent.degenerate", "score": True, "comment": str(e)}
    return [
        degenerate,
        _close("prevent.wide", prevent_threshold(-90.0, -30.0), -60.0),
        _close("prevent.reference", prevent_threshold(-51.0, -39.0), -45.0),
    ]


def check_received_power() -> List[EvaluatorResult]:
    f = 2.437e9
    lam = SPEED_OF_LIGHT / f
    d0 = lam / (4.0 * math.pi)
    results = [
        _close("path_loss.unit_distance", received_power(0.0, d0, f), 0.0),
        _close("path_loss.one_decade", received_power(0.0, 10.0 * d0, f), -20.0),
    ]
    # decade law over a log-spaced sweep of distances and carriers
    worst = 0.0
    for d in np.geomspace(0.5, 500.0, 13):
        for carrier in (2.412e9, 2.437e9, 5.18e9):
            step = received_power(20.0, 10.0 * float(d), carrier) - received_power(
                20.0, float(d), carrier
            )
            worst = max(worst, abs(step + 20.0))
    results.append(
        {
            "key": "path_loss.decade_law",
            "score": worst <= DB_TOLERANCE,
            "comment": f"largest deviation from -20 dB per decade: {worst:.3e}",
        }
    )
    # free-space loss written in its frequency form, 20log10(d) + 20log10(f) + 20log10(4pi/c)
    expected = 20.0 - (
        20.0 * math.log10(50.0)
        + 20.0 * math.log10(2.4e9)
        + 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)
    )
    results.append(_close("path_loss.20dbm_50m", received_power(20.0, 50.0, 2.4e9), expected))
    return results


def check_zones() -> List[EvaluatorResult]:
    t = Thresholds.from_prescan(-51.0, -45.0)
    return [
        _result("zone.at_prev", classify_zone(t.rssi_prev, t), Zone.SAFE),
        _result("zone.gray", classify_zone(-48.0, t), Zone.GRAY),
        _result("zone.at_min", classify_zone(-51.0, t), Zone.HANDOVER),
        _result("zone.handover", classify_zone(-60.0, t), Zone.HANDOVER),
    ]


def check_medium_access() -> List[EvaluatorResult]:
    model = ContentionModel(jitter=0.0)
    rng = np.random.default_rng(0)
    return [
        _result(
            "medium_access.idle",
            medium_access_delay(LoadModel.from_fraction(0.0), rng, model),
            model.base_delay,
        )
    ]


FORMULA_CHECKS: List[Callable[[], List[EvaluatorResult]]] = [
    check_probe_bounds,
    check_min_channel_time_bound,
    check_handover_latency,
    check_syncscan_delay,
    check_prescan,
    check_prevent_threshold,
    check_received_power,
    check_zones,
    check_medium_access,
]


def run_formula_checks() -> List[EvaluatorResult]:
    """Run every formula check; a check that raises is reported as a failure."""
    results: List[EvaluatorResult] = []
    for check in FORMULA_CHECKS:
        try:
            results.extend(check())
        except Exception as e:  # noqa: BLE001
            results.append({"key": check.__name__, "score": False, "comment": f"raised {e!r}"})
    return results
