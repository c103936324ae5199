"""
Scenario models.

One pydantic model per scenario section; every model forbids unknown keys so
that a typo in a scenario file is reported instead of silently ignored.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from roaming.latency import Duration, TimingParams
from roaming.mobility import SPEED_MAX, SPEED_MIN, Arena, MobilityModel, MotionLimits
from roaming.propagation import (
    Dbm,
    LinkBudget,
    Position,
    RegionPenalty,
    Thresholds,
    tx_power_for_edge,
)
from roaming.schemes.base import SchemeKind
from roaming.selection import (
    ExtMode,
    SelectionMode,
    SelectionPolicy,
    attach_selection,
)
from roaming.traffic import ContentionModel, LoadModel, TrafficPreset

MAX_APS = 100
MAX_STATIONS = 500

_Section = ConfigDict(frozen=True, extra="forbid")


class Layout(str, Enum):
    HEX = "hex"
    GRID = "grid"
    EXPLICIT = "explicit"


def hex_layout(count: int, spacing: float) -> list[Position]:
    """Staggered rows; every interior AP has six neighbors at ``spacing``."""
    cols = max(1, math.ceil(math.sqrt(count)))
    row_height = spacing * math.sqrt(3.0) / 2.0
    out = []
    for i in range(count):
        row, col = divmod(i, cols)
        offset = spacing / 2.0 if row % 2 else 0.0
        out.append(Position(col * spacing + offset, row * row_height))
    return out


def grid_layout(count: int, spacing: float) -> list[Position]:
    cols = max(1, math.ceil(math.sqrt(count)))
    return [Position((i % cols) * spacing, (i // cols) * spacing) for i in range(count)]


class ArenaSection(BaseModel):
    model_config = _Section

    # None: bounding box of the AP layout
    width: Optional[float] = Field(default=None, gt=0)
    height: Optional[float] = Field(default=None, gt=0)


class ApsSection(BaseModel):
    model_config = _Section

    layout: Layout = Layout.HEX
    count: Optional[int] = Field(default=None, ge=1, le=MAX_APS)
    spacing: float = Field(default=50.0, gt=0)
    positions: tuple[tuple[float, float], ...] = ()
    channels: tuple[int, ...] = ()
    tx_power_dbm: Optional[Dbm] = None
    frequency_hz: float = Field(default=2.437e9, gt=0)
    noise_std_db: float = Field(default=0.0, ge=0.0)
    rx_sensitivity: Dbm = -85.0
    neighbor_radius: Optional[float] = Field(default=None, gt=0)
    region_penalties: tuple[RegionPenalty, ...] = ()

    @model_validator(mode="after")
    def _check_placement(self) -> "ApsSection":
        if self.layout is Layout.EXPLICIT:
            if not self.positions:
                raise ValueError("explicit layout needs 'positions'")
            if len(self.positions) > MAX_APS:
                raise ValueError(f"at most {MAX_APS} APs are supported")
        elif self.count is None:
            raise ValueError(f"layout '{self.layout.value}' needs 'count'")
        elif self.positions:
            raise ValueError("'positions' only applies to the explicit layout")
        if self.channels and len(self.channels) != self.n_aps:
            raise ValueError("'channels' must list one channel per AP")
        return self

    @property
    def n_aps(self) -> int:
        return len(self.positions) if self.layout is Layout.EXPLICIT else int(self.count or 0)

    def placements(self) -> list[Position]:
        if self.layout is Layout.EXPLICIT:
            return [Position(x, y) for x, y in self.positions]
        if self.layout is Layout.GRID:
            return grid_layout(self.n_aps, self.spacing)
        return hex_layout(self.n_aps, self.spacing)

    @property
    def radius(self) -> float:
        return self.neighbor_radius if self.neighbor_radius is not None else 1.05 * self.spacing


class ThresholdsSection(BaseModel):
    model_config = _Section

    rssi_min: Dbm = -51.0
    rssi_prev: Optional[Dbm] = None
    rssi_max: Optional[Dbm] = None

    @model_validator(mode="after")
    def _one_upper(self) -> "ThresholdsSection":
        if self.rssi_prev is not None and self.rssi_max is not None:
            raise ValueError("give either rssi_prev or rssi_max, not both")
        self.build()
        return self

    def build(self) -> Thresholds:
        if self.rssi_max is not None:
            return Thresholds(rssi_min=self.rssi_min, rssi_max=self.rssi_max)
        prev = self.rssi_prev if self.rssi_prev is not None else -45.0
        return Thresholds.from_prescan(self.rssi_min, prev)


class WalkSection(BaseModel):
    model_config = _Section

    start: tuple[float, float]
    waypoints: tuple[tuple[float, float], ...] = ()
    speed: float = Field(default=1.0, gt=0)


class MobilitySection(BaseModel):
    model_config = _Section

    model: MobilityModel = MobilityModel.RANDOM_WAYPOINT
    stations: int = Field(default=100, ge=0, le=MAX_STATIONS)
    speed_min: float = Field(default=SPEED_MIN, gt=0)
    speed_max: float = Field(default=SPEED_MAX, gt=0)
    # lifts the 15 m/s ceiling
    allow_fast: bool = False
    pause_min: Duration = Duration(0)
    pause_max: Duration = Duration.seconds(2)
    edge_pause: Duration = Duration(0)
    tick: Duration = Duration.ms(10)
    walks: tuple[WalkSection, ...] = ()

    @model_validator(mode="after")
    def _check_ranges(self) -> "MobilitySection":
        if self.speed_max > SPEED_MAX and not self.allow_fast:
            raise ValueError(
                f"speed_max {self.speed_max} m/s exceeds {SPEED_MAX} m/s; set allow_fast to override"
            )
        if self.speed_min > self.speed_max:
            raise ValueError("speed_min must not exceed speed_max")
        if self.pause_min > self.pause_max:
            raise ValueError("pause_min must not exceed pause_max")
        if self.tick.micros <= 0:
            raise ValueError("tick must be positive")
        if self.model is MobilityModel.SCRIPTED and not self.walks:
            raise ValueError("scripted mobility needs 'walks'")
        if self.model is not MobilityModel.SCRIPTED and self.walks:
            raise ValueError("'walks' only applies to scripted mobility")
        return self

    @property
    def n_stations(self) -> int:
        return len(self.walks) if self.model is MobilityModel.SCRIPTED else self.stations

    def limits(self) -> MotionLimits:
        return MotionLimits(
            speed_min=self.speed_min,
            speed_max=self.speed_max,
            pause_min=self.pause_min,
            pause_max=self.pause_max,
            edge_pause=self.edge_pause,
        )


class TrafficSection(BaseModel):
    model_config = _Section

    preset: TrafficPreset = TrafficPreset.VOIP_ONLY
    load: float = Field(default=0.5, ge=0.0, le=1.0)
    inter_arrival: Duration = Duration.ms(20)
    deadline: Duration = Duration.ms(50)
    psm_capacity: int = Field(default=64, ge=1)
    base_delay: Duration = Duration.ms(1)
    contention_factor: float = Field(default=4.0, ge=0.0)
    jitter: float = Field(default=0.2, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_deadline(self) -> "TrafficSection":
        if self.inter_arrival.micros <= 0:
            raise ValueError("inter_arrival must be positive")
        if self.deadline <= self.inter_arrival:
            raise ValueError("deadline must exceed inter_arrival")
        return self

    def contention(self) -> ContentionModel:
        return ContentionModel(
            base_delay=self.base_delay,
            contention_factor=self.contention_factor,
            jitter=self.jitter,
        )

    def load_model(self) -> LoadModel:
        return LoadModel.from_fraction(self.load)


class SchemeSection(BaseModel):
    model_config = _Section

    kind: SchemeKind = SchemeKind.PSHP


class SelectionSection(BaseModel):
    model_config = _Section

    # None: plain RSSI choice, no heuristic attached
    mode: Optional[SelectionMode] = None
    w_rssi: float = Field(default=1.0, ge=0.0)
    w_ext: float = Field(default=1.0, ge=0.0)
    w_cnx: float = Field(default=1.0, ge=0.0)
    w_load: float = Field(default=1.0, ge=0.0)
    # None: the handoff threshold
    threshold: Optional[Dbm] = None
    capacity: int = Field(default=32, ge=1)
    ext_mode: ExtMode = ExtMode.NEIGHBORS
    initial_history: tuple[tuple[int, int, int], ...] = ()

    @field_validator("mode", mode="before")
    @classmethod
    def _none_means_off(cls, value: Any) -> Any:
        # YAML 1.1 reads a bare `off` as false
        if value is None or value is False:
            return None
        if isinstance(value, str) and value.lower() in ("none", "off", ""):
            return None
        return value

    def policy(self, thresholds: Thresholds) -> Optional[SelectionPolicy]:
        if self.mode is None:
            return None
        return SelectionPolicy(
            mode=self.mode,
            w_rssi=self.w_rssi,
            w_ext=self.w_ext,
            w_cnx=self.w_cnx,
            w_load=self.w_load,
            threshold=self.threshold if self.threshold is not None else thresholds.rssi_min,
            capacity=self.capacity,
        )


class InitialAssociation(str, Enum):
    STRONGEST = "strongest"
    RANDOM = "random"


class RunSection(BaseModel):
    model_config = _Section

    seed: int = Field(default=1, ge=0)
    duration: Duration = Duration.seconds(10)
    initial_association: InitialAssociation = InitialAssociation.STRONGEST

    @field_validator("duration")
    @classmethod
    def _positive(cls, value: Duration) -> Duration:
        if value.micros <= 0:
            raise ValueError("duration must be positive")
        return value


class Scenario(BaseModel):
    """A complete, validated simulation input."""

    model_config = _Section

    arena: ArenaSection = ArenaSection()
    aps: ApsSection
    timing: TimingParams = TimingParams()
    thresholds: ThresholdsSection = ThresholdsSection()
    mobility: MobilitySection = MobilitySection()
    traffic: TrafficSection = TrafficSection()
    scheme: SchemeSection = SchemeSection()
    selection: SelectionSection = SelectionSection()
    run: RunSection = RunSection()

    @field_validator("scheme", mode="before")
    @classmethod
    def _scheme_shorthand(cls, value: Any) -> Any:
        if isinstance(value, (str, SchemeKind)):
            return {"kind": value}
        return value

    @model_validator(mode="after")
    def _check_references(self) -> "Scenario":
        n = self.aps.n_aps
        arena = self.arena_box()
        for i, p in enumerate(self.aps.placements()):
            if not arena.contains(p):
                raise ValueError(f"AP {i} at ({p.x}, {p.y}) lies outside the arena")
        for ch in self.aps.channels:
            if not 0 <= ch < self.timing.n_channels:
                raise ValueError(f"channel {ch} is outside 0..{self.timing.n_channels - 1}")
        for region in self.aps.region_penalties:
            if region.ap is not None and not 0 <= region.ap < n:
                raise ValueError(f"region penalty names unknown AP {region.ap}")
        for src, dst, count in self.selection.initial_history:
            if not (0 <= src < n and 0 <= dst < n) or src == dst:
                raise ValueError(f"initial history entry ({src}, {dst}) names unknown APs")
            if count < 0:
                raise ValueError("initial history counts must be non-negative")
        for walk in self.mobility.walks:
            for x, y in (walk.start, *walk.waypoints):
                if not arena.contains(Position(x, y)):
                    raise ValueError(f"scripted point ({x}, {y}) lies outside the arena")
        attach_selection(self.scheme.kind, self.policy)
        return self

    # -- derived values ---------------------------------------------------

    @property
    def thresholds_model(self) -> Thresholds:
        return self.thresholds.build()

    @property
    def policy(self) -> Optional[SelectionPolicy]:
        return self.selection.policy(self.thresholds_model)

    def arena_box(self) -> Arena:
        placements = self.aps.placements()
        width = self.arena.width
        height = self.arena.height
        # a collinear layout still gets one spacing of room
        if width is None:
            width = max(p.x for p in placements) or self.aps.spacing
        if height is None:
            height = max(p.y for p in placements) or self.aps.spacing
        return Arena(width, height)

    def channel_of(self, ap: int) -> int:
        if self.aps.channels:
            return self.aps.channels[ap]
        return ap % self.timing.n_channels

    def tx_power(self) -> Dbm:
        """Configured P0, or the derived one (see ``cell_edge_rssi``)."""
        if self.aps.tx_power_dbm is not None:
            return self.aps.tx_power_dbm
        return tx_power_for_edge(
            self.cell_edge_rssi(), self.aps.spacing / 2.0, self.aps.frequency_hz
        )

    def cell_edge_rssi(self) -> Dbm:
        """RSSI heard halfway between two adjacent APs under the derived P0.

        A third of the way from rssi_min up to rssi_prev. With the default
        thresholds a hex cell corner (spacing / sqrt 3 from its AP) still hears
        that AP above rssi_min.
        """
        th = self.thresholds_model
        return th.rssi_min + (th.rssi_prev - th.rssi_min) / 3.0

    def link_budget(self) -> LinkBudget:
        return LinkBudget(
            tx_power_dbm=self.tx_power(),
            frequency_hz=self.aps.frequency_hz,
            noise_std_db=self.aps.noise_std_db,
            region_penalties=self.aps.region_penalties,
        )

    def with_overrides(
        self,
        *,
        scheme: Optional[Union[SchemeKind, str]] = None,
        selection: Optional[Union[SelectionMode, str]] = None,
        seed: Optional[int] = None,
        load: Optional[float] = None,
        duration: Optional[Duration] = None,
    ) -> "Scenario":
        """Copy with command-line overrides applied and re-validated."""
        data = self.model_dump(mode="python")
        if scheme is not None:
            data["scheme"] = {"kind": SchemeKind(scheme)}
        if selection is not None:
            data["selection"]["mode"] = selection
        if seed is not None:
            data["run"]["seed"] = seed
        if load is not None:
            data["traffic"]["load"] = load
        if duration is not None:
            data["run"]["duration"] = duration
        return Scenario.model_validate(data)
