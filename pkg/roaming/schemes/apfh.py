"""
Zone-based preemptive handoff.

The cell is split by the current link quality into safe, gray and handover
zones. In the gray zone the MS samples one channel per tick, round robin, and
remembers the best neighbor it heard; on entering the handover zone it skips
discovery and authenticates straight away with that neighbor.
"""

from __future__ import annotations

import logging
from collections.abc import Generator
from typing import Any, ClassVar, Optional

from roaming.propagation import Dbm, Zone, classify_zone
from roaming.schemes.base import (
    HandoffForm,
    HandoffScheme,
    Hold,
    SchemeEnv,
    SchemeKind,
    exchange_frames,
    full_handoff,
)
from roaming.selection import strongest

logger = logging.getLogger(__name__)


def tracked_reassociation(
    env: SchemeEnv, ms_id: int, target: int
) -> Generator[Hold, None, int]:
    """Authenticate and associate with the tracked AP, full scan if it refuses."""
    t = env.timing
    yield from exchange_frames(env, ms_id, target, t.auth_frame_count, "auth_frame")
    yield from exchange_frames(env, ms_id, target, t.assoc_frames, "assoc_frame")
    if env.try_associate(ms_id, target):
        return target
    env.count("association_refusals", ms_id)
    env.count("apfh_fallbacks", ms_id)
    return (yield from full_handoff(env, ms_id))


class Apfh(HandoffScheme):
    kind: ClassVar[SchemeKind] = SchemeKind.APFH

    def __init__(self, ms_id: int, env: SchemeEnv, policy: None = None) -> None:
        super().__init__(ms_id, env, None)
        self.tracked: dict[int, Dbm] = {}
        self._sweep = 0
        self.zone = Zone.SAFE

    def on_rssi(self, rssi: Dbm) -> None:
        if self.in_handoff:
            return
        self.zone = classify_zone(rssi, self.env.thresholds)
        if self.zone is Zone.SAFE:
            self.tracked.clear()
            self._sweep = 0
        elif self.zone is Zone.GRAY:
            self._sample_next_channel()
        else:
            self._hand_over()

    def _sample_next_channel(self) -> None:
        channel = self._sweep % self.env.timing.n_channels
        self._sweep += 1
        current = self.env.current_ap(self.ms_id)
        for ap, rssi in self.env.heard_on_channel(self.ms_id, channel):
            if ap != current:
                self.tracked[ap] = rssi

    def best_tracked(self) -> Optional[int]:
        return strongest(self.tracked.items(), self.env.thresholds.rssi_min)

    def _hand_over(self) -> None:
        self._open(HandoffForm.BASELINE)
        target = self.best_tracked()
        if target is None:
            logger.debug("MS %d: nothing tracked in the gray zone, full scan", self.ms_id)
            self.env.count("apfh_fallbacks", self.ms_id)
            procedure = full_handoff(self.env, self.ms_id)
        else:
            procedure = tracked_reassociation(self.env, self.ms_id, target)
        self.env.spawn(self.ms_id, procedure, self._done)

    def _done(self, target: Any, log: list[tuple[str, int]]) -> None:
        assert self.pending is not None
        self.pending.absorb(log)
        self.tracked.clear()
        self._sweep = 0
        self._close(int(target))
