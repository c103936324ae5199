from __future__ import annotations

import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from roaming.propagation import (
    LinkBudget,
    Position,
    RegionPenalty,
    Thresholds,
    Zone,
    classify_zone,
    prevent_threshold,
    received_power,
    tx_power_for_edge,
    wavelength,
)

pytestmark = pytest.mark.unit

distances = st.floats(min_value=0.01, max_value=5_000.0, allow_nan=False)
carriers = st.floats(min_value=1e8, max_value=6e9, allow_nan=False)
powers = st.floats(min_value=-30.0, max_value=40.0, allow_nan=False)


def test_unit_distance_has_no_loss():
    f = 2.437e9
    d = wavelength(f) / (4 * math.pi)
    assert received_power(0.0, d, f) == pytest.approx(0.0, abs=1e-9)


def test_one_decade_costs_twenty_db():
    f = 2.437e9
    d = wavelength(f) / (4 * math.pi)
    assert received_power(0.0, 10 * d, f) == pytest.approx(-20.0, abs=1e-9)


@given(powers, distances, carriers)
def test_decade_law(p0, d, f):
    step = received_power(p0, 10 * d, f) - received_power(p0, d, f)
    assert step == pytest.approx(-20.0, abs=1e-9)


@given(powers, distances, distances, carriers)
def test_power_decreases_with_distance(p0, d1, d2, f):
    if math.isclose(d1, d2, rel_tol=1e-9):
        return
    near, far = sorted((d1, d2))
    assert received_power(p0, near, f) > received_power(p0, far, f)


@pytest.mark.parametrize("d", [0.0, -1.0, float("nan"), float("inf")])
def test_received_power_rejects_bad_distance(d):
    with pytest.raises(ValueError):
        received_power(20.0, d, 2.4e9)


def test_received_power_rejects_bad_frequency():
    with pytest.raises(ValueError):
        received_power(20.0, 10.0, 0.0)


def test_tx_power_for_edge_inverts_received_power():
    p0 = tx_power_for_edge(-45.0, 25.0, 2.437e9)
    assert received_power(p0, 25.0, 2.437e9) == pytest.approx(-45.0, abs=1e-9)


@pytest.mark.parametrize(
    ("rssi_min", "rssi_max", "expected"),
    [(-90.0, -30.0, -60.0), (-51.0, -39.0, -45.0)],
)
def test_prevent_threshold_midpoint(rssi_min, rssi_max, expected):
    assert prevent_threshold(rssi_min, rssi_max) == pytest.approx(expected)


@pytest.mark.parametrize(("rssi_min", "rssi_max"), [(0.0, 0.0), (-40.0, -50.0)])
def test_prevent_threshold_rejects_empty_interval(rssi_min, rssi_max):
    with pytest.raises(ValueError):
        prevent_threshold(rssi_min, rssi_max)


@given(
    st.floats(min_value=-120.0, max_value=0.0),
    st.floats(min_value=0.01, max_value=60.0),
)
def test_prevent_threshold_is_equidistant(low, width):
    high = low + width
    mid = prevent_threshold(low, high)
    assert abs(mid - low) == pytest.approx(abs(high - mid))


class TestZones:
    thresholds = Thresholds.from_prescan(-51.0, -45.0)

    def test_preventive_threshold_itself_is_safe(self):
        assert classify_zone(self.thresholds.rssi_prev, self.thresholds) is Zone.SAFE

    def test_between_thresholds_is_gray(self):
        assert classify_zone(-48.0, self.thresholds) is Zone.GRAY

    def test_handoff_threshold_itself_is_handover(self):
        assert classify_zone(-51.0, self.thresholds) is Zone.HANDOVER

    def test_weak_link_is_handover(self):
        assert classify_zone(-60.0, self.thresholds) is Zone.HANDOVER

    @given(st.floats(min_value=-120.0, max_value=0.0))
    def test_zones_partition_the_axis(self, rssi):
        zone = classify_zone(rssi, self.thresholds)
        if rssi >= -45.0:
            assert zone is Zone.SAFE
        elif rssi > -51.0:
            assert zone is Zone.GRAY
        else:
            assert zone is Zone.HANDOVER


def test_thresholds_from_prescan_rejects_inverted_order():
    with pytest.raises(ValueError):
        Thresholds.from_prescan(-45.0, -51.0)


@given(
    st.floats(min_value=-100.0, max_value=-20.0),
    st.floats(min_value=1e-3, max_value=30.0),
)
def test_configured_preventive_threshold_is_kept_exactly(rssi_min, gap):
    rssi_prev = rssi_min + gap
    assume(rssi_prev > rssi_min)
    t = Thresholds.from_prescan(rssi_min, rssi_prev)
    assert t.rssi_prev == rssi_prev
    assert classify_zone(rssi_prev, t) is Zone.SAFE
    assert classify_zone(math.nextafter(rssi_prev, -math.inf), t) is Zone.GRAY


def test_stated_preventive_threshold_must_lie_inside():
    with pytest.raises(ValueError):
        Thresholds(rssi_min=-51.0, rssi_max=-39.0, stated_prev=-30.0)


def test_region_penalty_attenuates_inside_only():
    region = RegionPenalty(x0=10.0, y0=0.0, x1=20.0, y1=10.0, penalty_db=6.0)
    budget = LinkBudget(tx_power_dbm=20.0, region_penalties=(region,))
    plain = LinkBudget(tx_power_dbm=20.0)
    ap = Position(0.0, 0.0)
    inside, outside = Position(15.0, 5.0), Position(25.0, 5.0)
    assert budget.rssi(0, ap, inside) == pytest.approx(plain.rssi(0, ap, inside) - 6.0)
    assert budget.rssi(0, ap, outside) == pytest.approx(plain.rssi(0, ap, outside))


def test_region_penalty_can_target_one_ap():
    region = RegionPenalty(x0=0.0, y0=0.0, x1=50.0, y1=50.0, penalty_db=10.0, ap=1)
    budget = LinkBudget(tx_power_dbm=20.0, region_penalties=(region,))
    plain = LinkBudget(tx_power_dbm=20.0)
    ap, ms = Position(0.0, 0.0), Position(5.0, 5.0)
    assert budget.rssi(0, ap, ms) == pytest.approx(plain.rssi(0, ap, ms))
    assert budget.rssi(1, ap, ms) == pytest.approx(plain.rssi(1, ap, ms) - 10.0)


def test_region_corners_must_be_ordered():
    with pytest.raises(ValueError):
        RegionPenalty(x0=5.0, y0=0.0, x1=1.0, y1=1.0, penalty_db=1.0)
