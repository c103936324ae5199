"""Plain 802.11 handoff: wait for the link to fail, then scan every channel."""

from __future__ import annotations

import logging
from typing import Any, ClassVar

from roaming.propagation import Dbm
from roaming.schemes.base import HandoffForm, HandoffScheme, SchemeKind, full_handoff

logger = logging.getLogger(__name__)


class StandardActive(HandoffScheme):
    kind: ClassVar[SchemeKind] = SchemeKind.STANDARD_ACTIVE
    passive: ClassVar[bool] = False

    def on_rssi(self, rssi: Dbm) -> None:
        if self.in_handoff or rssi > self.env.thresholds.rssi_min:
            return
        logger.debug("MS %d: rssi %.2f dBm at or below threshold, scanning", self.ms_id, rssi)
        self._open(HandoffForm.BASELINE)
        procedure = full_handoff(
            self.env, self.ms_id, passive=self.passive, authenticate=True, policy=self.policy
        )
        self.env.spawn(self.ms_id, procedure, self._done)

    def _done(self, target: Any, log: list[tuple[str, int]]) -> None:
        assert self.pending is not None
        self.pending.absorb(log)
        self._close(int(target))


class StandardPassive(StandardActive):
    kind: ClassVar[SchemeKind] = SchemeKind.STANDARD_PASSIVE
    passive: ClassVar[bool] = True
