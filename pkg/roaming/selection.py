"""
Context-aware choice of the next AP.

Besides RSSI, each candidate is described by its load (MS_i), the number of
past handoffs from the current AP towards it (CNX_i) and the size of its own
neighborhood (EXT_i). One station is assigned at a time, so the feasible set
never exceeds the handful of APs heard in a scan and is scored exhaustively.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from roaming.errors import NotNeighborError
from roaming.propagation import Dbm, Position
from roaming.schemes.base import SchemeKind

DEFAULT_CAPACITY = 32
_TIE_RTOL = 1e-9


class ExtMode(str, Enum):
    # |N(AP_i)|
    NEIGHBORS = "neighbors"
    # neighbors of AP_i that are neither the current AP nor one of its neighbors
    TWO_HOP_EXCLUSIVE = "two_hop_exclusive"


class NeighborContext:
    """Neighbor graph, handoff history O[i][k] and per-AP association counts."""

    def __init__(
        self,
        neighbors: Mapping[int, Iterable[int]],
        n_aps: int,
        capacity: int = DEFAULT_CAPACITY,
        ext_mode: ExtMode = ExtMode.NEIGHBORS,
    ) -> None:
        if n_aps < 1:
            raise ValueError("a neighbor context needs at least one AP")
        self.n_aps = n_aps
        self.capacity = capacity
        self.ext_mode = ext_mode
        self._neighbors: dict[int, frozenset[int]] = {
            ap: frozenset(neighbors.get(ap, ())) for ap in range(n_aps)
        }
        for ap, adj in self._neighbors.items():
            if ap in adj:
                raise ValueError(f"AP {ap} cannot neighbor itself")
            for other in adj:
                if not 0 <= other < n_aps:
                    raise ValueError(f"AP {ap} lists unknown neighbor {other}")
                if ap not in self._neighbors[other]:
                    raise ValueError(f"neighbor relation is not symmetric for {ap} <-> {other}")
        self.history = np.zeros((n_aps, n_aps), dtype=np.int64)
        self.associations = np.zeros(n_aps, dtype=np.int64)

    @classmethod
    def from_positions(
        cls,
        positions: Sequence[Position],
        radius: float,
        capacity: int = DEFAULT_CAPACITY,
        ext_mode: ExtMode = ExtMode.NEIGHBORS,
    ) -> "NeighborContext":
        """APs closer than ``radius`` meters are neighbors."""
        adjacency: dict[int, set[int]] = {i: set() for i in range(len(positions))}
        for i, a in enumerate(positions):
            for j in range(i + 1, len(positions)):
                if a.distance_to(positions[j]) <= radius:
                    adjacency[i].add(j)
                    adjacency[j].add(i)
        return cls(adjacency, len(positions), capacity=capacity, ext_mode=ext_mode)

    def neighbors_of(self, ap: int) -> frozenset[int]:
        return self._neighbors[ap]

    def is_neighbor(self, current: int, candidate: int) -> bool:
        return candidate in self._neighbors[current]

    def associate(self, ap: int) -> None:
        self.associations[ap] += 1

    def seed_history(self, entries: Iterable[tuple[int, int, int]]) -> None:
        for src, dst, count in entries:
            if count < 0:
                raise ValueError("initial handoff counts must be non-negative")
            self.history[src, dst] += count

    def extent(self, candidate: int, current: int) -> int:
        adj = self._neighbors[candidate]
        if self.ext_mode is ExtMode.TWO_HOP_EXCLUSIVE:
            return len(adj - self._neighbors[current] - {current})
        return len(adj)

    def snapshot(self) -> dict[str, object]:
        return {
            "capacity": self.capacity,
            "ext_mode": self.ext_mode.value,
            "neighbors": {ap: sorted(adj) for ap, adj in self._neighbors.items()},
            "history": [
                [int(i), int(k), int(self.history[i, k])]
                for i, k in zip(*np.nonzero(self.history))
            ],
            "associations": [int(v) for v in self.associations],
        }


@dataclass(frozen=True, slots=True)
class CandidateFeatures:
    ap: int
    ms_count: int
    cnx: int
    ext: int
    rssi: Dbm


def candidate_features(
    ctx: NeighborContext, current_ap: int, candidate_ap: int, rssi: Dbm
) -> CandidateFeatures:
    """Snapshot MS_i, CNX_i, EXT_i and RSSI_i of one candidate."""
    if not ctx.is_neighbor(current_ap, candidate_ap):
        raise NotNeighborError(f"AP {candidate_ap} is not a neighbor of AP {current_ap}")
    return CandidateFeatures(
        ap=candidate_ap,
        ms_count=int(ctx.associations[candidate_ap]),
        cnx=int(ctx.history[current_ap, candidate_ap]),
        ext=ctx.extent(candidate_ap, current_ap),
        rssi=rssi,
    )


def neighbor_candidates(
    ctx: NeighborContext, current_ap: Optional[int], heard: Iterable[tuple[int, Dbm]]
) -> list[CandidateFeatures]:
    """Features of every heard AP that the formulation allows (neighbors of the current AP)."""
    out = []
    for ap, rssi in heard:
        if current_ap is None:
            out.append(
                CandidateFeatures(ap, int(ctx.associations[ap]), 0, len(ctx.neighbors_of(ap)), rssi)
            )
        elif ap != current_ap and ctx.is_neighbor(current_ap, ap):
            out.append(candidate_features(ctx, current_ap, ap, rssi))
    return out


def record_handoff(ctx: NeighborContext, from_ap: int, to_ap: int) -> NeighborContext:
    """Count one completed handoff and move the station's association."""
    if ctx.associations[from_ap] <= 0:
        raise ValueError(f"AP {from_ap} has no associated station to hand off")
    ctx.history[from_ap, to_ap] += 1
    ctx.associations[from_ap] -= 1
    ctx.associations[to_ap] += 1
    return ctx


class SelectionMode(str, Enum):
    WEIGHTED_SUM = "weighted_sum"
    LEXICOGRAPHIC = "lexicographic"
    RSSI_ONLY = "rssi_only"


class SelectionPolicy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: SelectionMode = SelectionMode.WEIGHTED_SUM
    w_rssi: float = Field(default=1.0, ge=0.0)
    w_ext: float = Field(default=1.0, ge=0.0)
    w_cnx: float = Field(default=1.0, ge=0.0)
    w_load: float = Field(default=1.0, ge=0.0)
    # candidates must be strictly stronger than this
    threshold: Dbm = -51.0
    capacity: int = Field(default=DEFAULT_CAPACITY, ge=1)

    @model_validator(mode="after")
    def _check_weights(self) -> "SelectionPolicy":
        if self.mode is SelectionMode.WEIGHTED_SUM and not any(
            (self.w_rssi, self.w_ext, self.w_cnx, self.w_load)
        ):
            raise ValueError("weighted_sum needs at least one positive weight")
        return self

    @property
    def total_weight(self) -> float:
        return self.w_rssi + self.w_ext + self.w_cnx + self.w_load


def feasible(candidates: Iterable[CandidateFeatures], policy: SelectionPolicy) -> list[CandidateFeatures]:
    return [c for c in candidates if c.rssi > policy.threshold and c.ms_count < policy.capacity]


def _normalized(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def weighted_scores(cands: Sequence[CandidateFeatures], policy: SelectionPolicy) -> list[float]:
    rssi = _normalized([c.rssi for c in cands])
    ext = _normalized([float(c.ext) for c in cands])
    cnx = _normalized([float(c.cnx) for c in cands])
    load = _normalized([float(c.ms_count) for c in cands])
    return [
        policy.w_rssi * r + policy.w_ext * e + policy.w_cnx * x - policy.w_load * m
        for r, e, x, m in zip(rssi, ext, cnx, load)
    ]


def _argmax_lowest_id(
    cands: Sequence[CandidateFeatures], scores: Sequence[float], scale: float
) -> int:
    # ties are relative to the total weight, so scaling every weight keeps the choice
    best = max(scores)
    tol = _TIE_RTOL * scale
    return min(c.ap for c, s in zip(cands, scores) if s >= best - tol)


def select_next_ap(
    candidates: Sequence[CandidateFeatures],
    current_rssi: Dbm,
    policy: SelectionPolicy,
    *,
    require_better: bool = False,
) -> Optional[int]:
    """Pick the next AP among ``candidates``, or None when nothing is feasible.

    ``require_better`` restricts the choice to candidates stronger than
    ``current_rssi`` (the preventive form of the handoff).
    """
    pool = feasible(candidates, policy)
    if require_better:
        pool = [c for c in pool if c.rssi > current_rssi]
    if not pool:
        return None
    if policy.mode is SelectionMode.WEIGHTED_SUM:
        return _argmax_lowest_id(pool, weighted_scores(pool, policy), policy.total_weight)
    if policy.mode is SelectionMode.LEXICOGRAPHIC:
        return min(pool, key=lambda c: (-c.rssi, -c.ext, -c.cnx, c.ms_count, c.ap)).ap
    return min(pool, key=lambda c: (-c.rssi, c.ap)).ap


def strongest(heard: Iterable[tuple[int, Dbm]], floor: Dbm) -> Optional[int]:
    """Plain 802.11 rule: the strongest AP above ``floor``, lowest id on ties."""
    usable = [(ap, rssi) for ap, rssi in heard if rssi > floor]
    if not usable:
        return None
    return min(usable, key=lambda item: (-item[1], item[0]))[0]


@dataclass(frozen=True, slots=True)
class SchemeSpec:
    kind: SchemeKind
    policy: Optional[SelectionPolicy] = None


_SELECTABLE = frozenset(
    {SchemeKind.STANDARD_ACTIVE, SchemeKind.STANDARD_PASSIVE, SchemeKind.PSHP}
)


def attach_selection(
    scheme: Union[SchemeKind, SchemeSpec], policy: Optional[SelectionPolicy]
) -> SchemeSpec:
    """Return the scheme variant whose next-AP choice goes through ``policy``."""
    kind = scheme.kind if isinstance(scheme, SchemeSpec) else SchemeKind(scheme)
    if policy is not None and kind not in _SELECTABLE:
        raise ValueError(f"the selection heuristic cannot be attached to {kind.value}")
    return SchemeSpec(kind, policy)
