"""
Prevent-scan handoff.

A periodic pre-scan, run under power-save cover, keeps a short list of the
strongest neighbors. When the link degrades past the preventive threshold the
MS re-associates with the list head if it is better than the current AP
(form 1). Once the link fails it re-associates with the list head straight
away (form 2) or, with nothing usable listed, runs a classical scan (form 3).

The decision logic is the pure ``pshp_transition`` table; ``Pshp`` executes
its actions against the simulation.
"""

from __future__ import annotations

import logging
from collections.abc import Generator, Iterable, Iterator
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Optional, Union

from roaming.latency import PrescanMode
from roaming.propagation import Dbm, Thresholds
from roaming.schemes.base import (
    HandoffForm,
    HandoffScheme,
    Hold,
    ProcessHandle,
    SchemeEnv,
    SchemeKind,
    exchange_frames,
    full_handoff,
)
from roaming.selection import SelectionPolicy, neighbor_candidates, select_next_ap

logger = logging.getLogger(__name__)

MAX_LIST_ENTRIES = 6


class PshpState(str, Enum):
    STANDBY = "standby"
    PRE_HANDOFF = "pre_handoff"
    URGENT_HANDOVER = "urgent_handover"
    HANDOFF_FORM1 = "handoff_form1"
    HANDOFF_FORM2 = "handoff_form2"
    HANDOFF_FORM3 = "handoff_form3"


HANDOFF_STATES = frozenset(
    {PshpState.HANDOFF_FORM1, PshpState.HANDOFF_FORM2, PshpState.HANDOFF_FORM3}
)
# states that decide on the sample that brought the MS into them
TRANSIENT_STATES = frozenset({PshpState.PRE_HANDOFF, PshpState.URGENT_HANDOVER})

_FORM_OF_STATE = {
    PshpState.HANDOFF_FORM1: HandoffForm.FORM1,
    PshpState.HANDOFF_FORM2: HandoffForm.FORM2,
    PshpState.HANDOFF_FORM3: HandoffForm.FORM3,
}


@dataclass(frozen=True, slots=True)
class RssiSample:
    rssi: Dbm


@dataclass(frozen=True, slots=True)
class PrescanDue:
    pass


@dataclass(frozen=True, slots=True)
class AssociationResult:
    success: bool


PshpEvent = Union[RssiSample, PrescanDue, AssociationResult]


class PshpAction(str, Enum):
    NONE = "none"
    START_PRESCAN = "start_prescan"
    REASSOCIATE = "reassociate"
    FULL_SCAN = "full_scan"
    PRESCAN_NOW = "prescan_now"
    PURGE_AND_PRESCAN = "purge_and_prescan"


@dataclass(frozen=True, slots=True)
class DecisionView:
    """What the table may know besides the event: thresholds and the list's verdicts."""

    thresholds: Thresholds
    form1_target: Optional[int] = None
    urgent_target: Optional[int] = None


@dataclass(frozen=True, slots=True)
class Transition:
    state: PshpState
    action: PshpAction = PshpAction.NONE
    target: Optional[int] = None
    ignored: bool = False


def pshp_association_gate(head_rssi: Dbm, current_rssi: Dbm, t: Thresholds) -> bool:
    """Pre-handoff rule: the head must beat both the handoff threshold and the current AP."""
    return head_rssi > t.rssi_min and head_rssi > current_rssi


def pshp_transition(state: PshpState, event: PshpEvent, view: DecisionView) -> Transition:
    th = view.thresholds
    if isinstance(event, RssiSample):
        if state is PshpState.STANDBY:
            if event.rssi <= th.rssi_min:
                return Transition(PshpState.URGENT_HANDOVER)
            if event.rssi <= th.rssi_prev:
                return Transition(PshpState.PRE_HANDOFF)
            return Transition(PshpState.STANDBY)
        if state is PshpState.PRE_HANDOFF:
            if event.rssi <= th.rssi_min:
                return Transition(PshpState.URGENT_HANDOVER)
            if view.form1_target is not None:
                return Transition(
                    PshpState.HANDOFF_FORM1, PshpAction.REASSOCIATE, view.form1_target
                )
            return Transition(PshpState.STANDBY)
        if state is PshpState.URGENT_HANDOVER:
            if view.urgent_target is not None:
                return Transition(
                    PshpState.HANDOFF_FORM2, PshpAction.REASSOCIATE, view.urgent_target
                )
            return Transition(PshpState.HANDOFF_FORM3, PshpAction.FULL_SCAN)
        return Transition(state, ignored=True)

    if isinstance(event, PrescanDue):
        if state in (PshpState.STANDBY, PshpState.PRE_HANDOFF):
            return Transition(state, PshpAction.START_PRESCAN)
        return Transition(state, ignored=True)

    if isinstance(event, AssociationResult):
        if state not in HANDOFF_STATES:
            return Transition(state, ignored=True)
        if event.success:
            return Transition(PshpState.STANDBY, PshpAction.PRESCAN_NOW)
        if state is PshpState.HANDOFF_FORM1:
            return Transition(PshpState.STANDBY, PshpAction.PURGE_AND_PRESCAN)
        return Transition(PshpState.HANDOFF_FORM3, PshpAction.FULL_SCAN)

    raise TypeError(f"unknown PSHP event {event!r}")


@dataclass(frozen=True, slots=True)
class ListEntry:
    ap: int
    rssi: Dbm
    sampled_at: int


class DynamicApList:
    """At most six neighbors, strongest first, lowest AP id on equal RSSI."""

    def __init__(self, max_entries: int = MAX_LIST_ENTRIES) -> None:
        self.max_entries = max_entries
        self._entries: list[ListEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ListEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> tuple[ListEntry, ...]:
        return tuple(self._entries)

    @property
    def head(self) -> Optional[ListEntry]:
        return self._entries[0] if self._entries else None

    def merge(
        self, samples: Iterable[tuple[int, Dbm]], now: int, exclude: Optional[int] = None
    ) -> None:
        """Fresh samples replace older entries of the same AP."""
        by_ap = {e.ap: e for e in self._entries}
        for ap, rssi in samples:
            if ap != exclude:
                by_ap[ap] = ListEntry(ap, rssi, now)
        if exclude is not None:
            by_ap.pop(exclude, None)
        self._entries = sorted(by_ap.values(), key=lambda e: (-e.rssi, e.ap))[
            : self.max_entries
        ]

    def purge(self, now: int, max_age: int, exclude: Optional[int] = None) -> None:
        self._entries = [
            e for e in self._entries if now - e.sampled_at <= max_age and e.ap != exclude
        ]

    def clear(self) -> None:
        self._entries.clear()


def reassociation(
    env: SchemeEnv, ms_id: int, target: int, leave_channel: bool
) -> Generator[Hold, None, Optional[int]]:
    """Preauthenticated handoff to a listed AP: re-association frames only."""
    if leave_channel:
        yield Hold(env.timing.t_switch.micros, "prescan_abort_switch")
    yield from exchange_frames(env, ms_id, target, env.timing.assoc_frames, "reassoc_frame")
    return target if env.try_associate(ms_id, target) else None


def scan_and_reassociate(
    env: SchemeEnv,
    ms_id: int,
    leave_channel: bool,
    authenticate: bool,
    policy: Optional[SelectionPolicy],
) -> Generator[Hold, None, int]:
    if leave_channel:
        yield Hold(env.timing.t_switch.micros, "prescan_abort_switch")
    return (yield from full_handoff(env, ms_id, authenticate=authenticate, policy=policy))


class Pshp(HandoffScheme):
    kind: ClassVar[SchemeKind] = SchemeKind.PSHP

    def __init__(
        self, ms_id: int, env: SchemeEnv, policy: Optional[SelectionPolicy] = None
    ) -> None:
        super().__init__(ms_id, env, policy)
        self.state = PshpState.STANDBY
        self.dynamic_list = DynamicApList()
        self.preauthenticated = False
        self.next_prescan_at = 0
        self.off_channel = False
        self._prescan: Optional[ProcessHandle] = None
        self._timer_token = 0
        # the urgent target of the last view came from the plain list head
        self._urgent_from_head = False

    # -- events -----------------------------------------------------------

    def start(self) -> None:
        self.preauthenticated = True
        self._prescan_soon()

    def on_rssi(self, rssi: Dbm) -> None:
        if self.in_handoff:
            return
        if self.off_channel and rssi > self.env.thresholds.rssi_min:
            return
        self._feed(RssiSample(rssi))

    def on_timer(self, token: int) -> None:
        if token != self._timer_token:
            return
        self._feed(PrescanDue())

    def _feed(self, event: PshpEvent) -> None:
        while True:
            view = self._view(event) if isinstance(event, RssiSample) else DecisionView(
                self.env.thresholds
            )
            previous = self.state
            tr = pshp_transition(self.state, event, view)
            if tr.ignored:
                self.env.count("ignored_events", self.ms_id)
                return
            self.state = tr.state
            self._act(previous, tr)
            if not (isinstance(event, RssiSample) and self.state in TRANSIENT_STATES):
                return

    def _view(self, sample: RssiSample) -> DecisionView:
        env = self.env
        current = env.current_ap(self.ms_id)
        self.dynamic_list.purge(env.now, 2 * env.alpha.micros, exclude=current)
        th = env.thresholds
        if self.policy is None:
            head = self.dynamic_list.head
            form1 = urgent = None
            if head is not None:
                if pshp_association_gate(head.rssi, sample.rssi, th):
                    form1 = head.ap
                if head.rssi > th.rssi_min:
                    urgent = head.ap
            return DecisionView(th, form1, urgent)
        candidates = neighbor_candidates(
            env.ctx, current, [(e.ap, e.rssi) for e in self.dynamic_list]
        )
        urgent = select_next_ap(candidates, sample.rssi, self.policy)
        head = self.dynamic_list.head
        self._urgent_from_head = False
        if urgent is None and head is not None and head.rssi > th.rssi_min:
            # nothing feasible for the policy: the plain rule
            self._urgent_from_head = True
            urgent = head.ap
        return DecisionView(
            th,
            select_next_ap(candidates, sample.rssi, self.policy, require_better=True),
            urgent,
        )

    # -- actions ----------------------------------------------------------

    def _act(self, previous: PshpState, tr: Transition) -> None:
        if tr.action is PshpAction.START_PRESCAN:
            self._start_prescan()
        elif tr.action is PshpAction.REASSOCIATE:
            assert tr.target is not None
            pending = self._open(_FORM_OF_STATE[tr.state])
            if tr.state is PshpState.HANDOFF_FORM2 and self._urgent_from_head:
                self.env.count("heuristic_fallbacks", self.ms_id)
            leave = self._interrupt_prescan()
            pending.interrupted_prescan = leave
            logger.debug(
                "MS %d: %s towards AP %d", self.ms_id, tr.state.value, tr.target
            )
            self.env.spawn(
                self.ms_id,
                reassociation(self.env, self.ms_id, tr.target, leave),
                self._association_done,
            )
        elif tr.action is PshpAction.FULL_SCAN:
            if previous is PshpState.HANDOFF_FORM2:
                assert self.pending is not None
                self.pending.form = HandoffForm.FORM3
                self.env.count("form2_fallbacks", self.ms_id)
                leave = False
            else:
                pending = self._open(HandoffForm.FORM3)
                leave = self._interrupt_prescan()
                pending.interrupted_prescan = leave
            self.env.spawn(
                self.ms_id,
                scan_and_reassociate(
                    self.env, self.ms_id, leave, not self.preauthenticated, self.policy
                ),
                self._scan_done,
            )
        elif tr.action is PshpAction.PRESCAN_NOW:
            self._prescan_soon()
        elif tr.action is PshpAction.PURGE_AND_PRESCAN:
            self.dynamic_list.clear()
            self._prescan_soon()

    def _association_done(self, accepted: Any, log: list[tuple[str, int]]) -> None:
        assert self.pending is not None
        self.pending.absorb(log)
        success = accepted is not None
        if success:
            self._close(int(accepted))
        elif self.state is PshpState.HANDOFF_FORM1:
            self.env.count("association_refusals", self.ms_id)
            self._close(None)
        else:
            self.env.count("association_refusals", self.ms_id)
        self._feed(AssociationResult(success))

    def _scan_done(self, target: Any, log: list[tuple[str, int]]) -> None:
        assert self.pending is not None
        self.pending.absorb(log)
        self._close(int(target))
        self._feed(AssociationResult(True))

    # -- pre-scan ---------------------------------------------------------

    def _prescan_soon(self) -> None:
        self._timer_token += 1
        self.env.set_timer(self.ms_id, self.env.now, self._timer_token)

    def _start_prescan(self) -> None:
        env = self.env
        if self._prescan is not None and self._prescan.alive:
            self._prescan.cancel()
            if self.off_channel:
                self._return_home()
        self.next_prescan_at = env.now + env.alpha.micros
        self._timer_token += 1
        env.set_timer(self.ms_id, self.next_prescan_at, self._timer_token)
        self._prescan = env.spawn(self.ms_id, self.prescan_cycle(), self._prescan_done)

    def _prescan_done(self, _: Any, log: list[tuple[str, int]]) -> None:
        self._prescan = None
        self.dynamic_list.purge(
            self.env.now, 2 * self.env.alpha.micros, exclude=self.env.current_ap(self.ms_id)
        )

    def _leave_home(self) -> None:
        self.env.psm_enter(self.ms_id)
        self.off_channel = True

    def _return_home(self) -> None:
        self.off_channel = False
        self.env.psm_flush(self.ms_id)

    def _interrupt_prescan(self) -> bool:
        """Abandon the running cycle; True when the MS was away from its channel."""
        was_away = self.off_channel
        if self._prescan is not None:
            self._prescan.cancel()
            self._prescan = None
        if was_away:
            self.off_channel = False
            self.env.psm_abandon(self.ms_id)
            self.env.count("interrupted_prescans", self.ms_id)
        return was_away

    def prescan_cycle(self) -> Generator[Hold, None, None]:
        """Visit every channel once, refreshing the dynamic list after each visit."""
        env, t = self.env, self.env.timing
        visit = (t.t_switch + t.prescan_wait).micros
        contiguous = t.prescan_mode is PrescanMode.CONTIGUOUS
        gap = env.alpha.micros // t.n_channels - visit
        if contiguous:
            self._leave_home()
        for channel in range(t.n_channels):
            if not contiguous:
                self._leave_home()
            yield Hold(visit, "prescan_visit", channel=channel)
            self.dynamic_list.merge(
                env.heard_on_channel(self.ms_id, channel),
                env.now,
                exclude=env.current_ap(self.ms_id),
            )
            if not contiguous:
                self._return_home()
                if gap > 0 and channel < t.n_channels - 1:
                    yield Hold(gap, "prescan_home", channel=channel)
        if contiguous:
            self._return_home()
