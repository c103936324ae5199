"""
Mobile station movement: Random Waypoint, Random Direction and scripted walks.

Positions advance on a fixed tick. Each step consumes random draws from the
station's own ``numpy.random.Generator`` in a fixed order so that a seeded run
can be replayed step by step:

- Random Waypoint, on arrival: pause, target x, target y, speed.
- Random Direction, on reaching an edge: heading, speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from roaming.latency import Duration
from roaming.propagation import Position

SPEED_MIN = 0.1  # m/s
SPEED_MAX = 15.0  # m/s


class MobilityModel(str, Enum):
    RANDOM_WAYPOINT = "random_waypoint"
    RANDOM_DIRECTION = "random_direction"
    SCRIPTED = "scripted"


@dataclass(frozen=True, slots=True)
class Arena:
    """Closed rectangle [0, width] x [0, height]."""

    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"arena must have positive area, got {self.width} x {self.height}")

    def contains(self, p: Position) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height

    def clamp(self, x: float, y: float) -> Position:
        return Position(min(max(x, 0.0), self.width), min(max(y, 0.0), self.height))

    def uniform_point(self, rng: np.random.Generator) -> Position:
        x = float(rng.uniform(0.0, self.width))
        y = float(rng.uniform(0.0, self.height))
        return Position(x, y)


@dataclass(frozen=True, slots=True)
class MotionLimits:
    speed_min: float = SPEED_MIN
    speed_max: float = SPEED_MAX
    pause_min: Duration = Duration(0)
    pause_max: Duration = Duration.seconds(2)
    edge_pause: Duration = Duration(0)

    def __post_init__(self) -> None:
        if not 0 < self.speed_min <= self.speed_max:
            raise ValueError("speeds must satisfy 0 < speed_min <= speed_max")
        if self.pause_min > self.pause_max:
            raise ValueError("pause_min must not exceed pause_max")

    def draw_speed(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.speed_min, self.speed_max))

    def draw_pause(self, rng: np.random.Generator) -> int:
        lo, hi = self.pause_min.micros, self.pause_max.micros
        if lo == hi:
            # keep the draw so the stream position does not depend on the bounds
            rng.uniform(0.0, 1.0)
            return lo
        return int(math.floor(float(rng.uniform(lo, hi)) + 0.5))


@dataclass(frozen=True, slots=True)
class MobilityState:
    model: MobilityModel
    current: Position
    speed: float
    target: Optional[Position] = None
    heading: float = 0.0
    pause_until: int = 0
    waypoints: tuple[Position, ...] = ()


def initial_state(
    model: MobilityModel,
    arena: Arena,
    limits: MotionLimits,
    rng: np.random.Generator,
    start: Optional[Position] = None,
) -> MobilityState:
    """Fresh state: uniform position, then the model's first destination or heading."""
    current = start if start is not None else arena.uniform_point(rng)
    if model is MobilityModel.RANDOM_WAYPOINT:
        target = arena.uniform_point(rng)
        return MobilityState(model, current, limits.draw_speed(rng), target=target)
    if model is MobilityModel.RANDOM_DIRECTION:
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        return MobilityState(model, current, limits.draw_speed(rng), heading=heading)
    raise ValueError("scripted mobility is built with scripted_state()")


def scripted_state(start: Position, waypoints: tuple[Position, ...], speed: float) -> MobilityState:
    if waypoints and speed <= 0:
        raise ValueError("a scripted walk needs a positive speed")
    return MobilityState(MobilityModel.SCRIPTED, start, speed, waypoints=waypoints)


def _move_towards(current: Position, target: Position, step: float) -> tuple[Position, bool]:
    dx, dy = target.x - current.x, target.y - current.y
    dist = math.hypot(dx, dy)
    if dist <= step:
        return target, True
    ux, uy = dx / dist, dy / dist
    return Position(current.x + step * ux, current.y + step * uy), False


def rwp_step(
    s: MobilityState,
    dt: Duration,
    now: int,
    arena: Arena,
    limits: MotionLimits,
    rng: np.random.Generator,
) -> MobilityState:
    """Advance a Random Waypoint station from ``now`` to ``now + dt``."""
    if s.model is not MobilityModel.RANDOM_WAYPOINT:
        raise ValueError("rwp_step needs a random_waypoint state")
    if dt.micros <= 0:
        raise ValueError("dt must be positive")
    if now < s.pause_until:
        return s
    assert s.target is not None
    step = s.speed * dt.micros / 1e6
    position, arrived = _move_towards(s.current, s.target, step)
    if not arrived:
        return replace(s, current=position)
    pause = limits.draw_pause(rng)
    target = arena.uniform_point(rng)
    speed = limits.draw_speed(rng)
    return replace(
        s, current=position, target=target, speed=speed, pause_until=now + dt.micros + pause
    )


def _distance_to_edge(p: Position, ux: float, uy: float, arena: Arena) -> float:
    limits = []
    if ux > 0:
        limits.append((arena.width - p.x) / ux)
    elif ux < 0:
        limits.append(-p.x / ux)
    if uy > 0:
        limits.append((arena.height - p.y) / uy)
    elif uy < 0:
        limits.append(-p.y / uy)
    return max(0.0, min(limits)) if limits else math.inf


def inward_heading(p: Position, arena: Arena, rng: np.random.Generator) -> float:
    """Uniform heading pointing into the arena from a point on its boundary."""
    normals = []
    if p.x <= 0.0:
        normals.append((1.0, 0.0))
    elif p.x >= arena.width:
        normals.append((-1.0, 0.0))
    if p.y <= 0.0:
        normals.append((0.0, 1.0))
    elif p.y >= arena.height:
        normals.append((0.0, -1.0))
    if not normals:
        return float(rng.uniform(0.0, 2.0 * math.pi))
    nx = sum(n[0] for n in normals)
    ny = sum(n[1] for n in normals)
    center = math.atan2(ny, nx)
    spread = math.pi / 2 if len(normals) == 1 else math.pi / 4
    return center + float(rng.uniform(-spread, spread))


def rd_step(
    s: MobilityState,
    dt: Duration,
    now: int,
    arena: Arena,
    limits: MotionLimits,
    rng: np.random.Generator,
) -> MobilityState:
    """Advance a Random Direction station; it only turns once it hits an edge."""
    if s.model is not MobilityModel.RANDOM_DIRECTION:
        raise ValueError("rd_step needs a random_direction state")
    if dt.micros <= 0:
        raise ValueError("dt must be positive")
    if now < s.pause_until:
        return s
    ux, uy = math.cos(s.heading), math.sin(s.heading)
    step = s.speed * dt.micros / 1e6
    reach = _distance_to_edge(s.current, ux, uy, arena)
    if step < reach:
        position = arena.clamp(s.current.x + step * ux, s.current.y + step * uy)
        return replace(s, current=position)
    edge = arena.clamp(s.current.x + reach * ux, s.current.y + reach * uy)
    # snap to the boundary the ray hit so the inward-heading rule sees it
    x, y = edge.x, edge.y
    if abs(x) < 1e-9:
        x = 0.0
    elif abs(x - arena.width) < 1e-9:
        x = arena.width
    if abs(y) < 1e-9:
        y = 0.0
    elif abs(y - arena.height) < 1e-9:
        y = arena.height
    edge = Position(x, y)
    heading = inward_heading(edge, arena, rng)
    speed = limits.draw_speed(rng)
    return replace(
        s,
        current=edge,
        heading=heading,
        speed=speed,
        pause_until=now + dt.micros + limits.edge_pause.micros,
    )


def scripted_step(s: MobilityState, dt: Duration) -> MobilityState:
    if not s.waypoints:
        return s
    remaining = s.speed * dt.micros / 1e6
    current, waypoints = s.current, s.waypoints
    while waypoints and remaining > 0:
        nxt = waypoints[0]
        dist = current.distance_to(nxt)
        current, arrived = _move_towards(current, nxt, remaining)
        if not arrived:
            break
        remaining -= dist
        waypoints = waypoints[1:]
    return replace(s, current=current, waypoints=waypoints)


def advance(
    s: MobilityState,
    dt: Duration,
    now: int,
    arena: Arena,
    limits: MotionLimits,
    rng: np.random.Generator,
) -> MobilityState:
    if s.model is MobilityModel.RANDOM_WAYPOINT:
        return rwp_step(s, dt, now, arena, limits, rng)
    if s.model is MobilityModel.RANDOM_DIRECTION:
        return rd_step(s, dt, now, arena, limits, rng)
    return scripted_step(s, dt)
