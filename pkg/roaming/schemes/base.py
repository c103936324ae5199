"""
Pieces shared by every handoff scheme.

Procedures are generators that yield ``Hold`` objects; the engine turns each
hold into one queued event and resumes the generator when it fires. Scans,
authentication and association are composed with ``yield from`` so that a
whole handoff stays one cancellable process.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Generator, Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, ClassVar, Optional, Protocol

from roaming.latency import Duration, TimingParams
from roaming.propagation import Dbm, Thresholds

if TYPE_CHECKING:
    from roaming.selection import NeighborContext, SelectionPolicy

logger = logging.getLogger(__name__)


class SchemeKind(str, Enum):
    STANDARD_ACTIVE = "standard_active"
    STANDARD_PASSIVE = "standard_passive"
    APFH = "apfh"
    PSHP = "pshp"


class HandoffForm(str, Enum):
    FORM1 = "form1"
    FORM2 = "form2"
    FORM3 = "form3"
    BASELINE = "baseline"


@dataclass(frozen=True, slots=True)
class Hold:
    """Suspend the calling procedure for ``delay`` microseconds."""

    delay: int
    label: str
    channel: Optional[int] = None
    ap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError(f"hold {self.label!r} has negative delay {self.delay}")


Procedure = Generator[Hold, None, Any]


@dataclass(frozen=True, slots=True)
class HandoffRecord:
    ms_id: int
    from_ap: Optional[int]
    to_ap: int
    form: HandoffForm
    trigger_time: int
    complete_time: int
    components: tuple[tuple[str, int], ...] = ()
    interrupted_prescan: bool = False

    def __post_init__(self) -> None:
        if self.complete_time < self.trigger_time:
            raise ValueError("a handoff cannot complete before it is triggered")

    @property
    def latency(self) -> Duration:
        return Duration(self.complete_time - self.trigger_time)

    @property
    def component_total(self) -> int:
        return sum(delay for _, delay in self.components)


@dataclass(slots=True)
class ScanOutcome:
    """Responders of a scan keyed by AP id."""

    heard: dict[int, Dbm] = field(default_factory=dict)

    def items(self) -> list[tuple[int, Dbm]]:
        return sorted(self.heard.items())

    @property
    def empty(self) -> bool:
        return not self.heard


@dataclass(slots=True)
class PendingHandoff:
    """Book-keeping of a handoff between its trigger and its completion."""

    trigger_time: int
    from_ap: Optional[int]
    form: HandoffForm
    components: list[tuple[str, int]] = field(default_factory=list)
    interrupted_prescan: bool = False

    def absorb(self, log: Iterable[tuple[str, int]]) -> None:
        self.components.extend(log)


class ProcessHandle(Protocol):
    alive: bool
    log: list[tuple[str, int]]

    def cancel(self) -> None: ...


class SchemeEnv(Protocol):
    """What a scheme may ask of the simulation it runs in."""

    timing: TimingParams
    thresholds: Thresholds
    ctx: "NeighborContext"
    alpha: Duration

    @property
    def now(self) -> int: ...

    def current_ap(self, ms_id: int) -> Optional[int]: ...

    def rssi(self, ms_id: int, ap: int) -> Dbm: ...

    def heard_on_channel(self, ms_id: int, channel: int) -> list[tuple[int, Dbm]]: ...

    def access_delay(self, ms_id: int, ap: int) -> Duration: ...

    def spawn(
        self, ms_id: int, procedure: Procedure, on_done: Callable[[Any, list[tuple[str, int]]], None]
    ) -> ProcessHandle: ...

    def set_timer(self, ms_id: int, at: int, token: int) -> None: ...

    def begin_handoff(self, ms_id: int) -> None: ...

    def end_handoff(self, ms_id: int, record: Optional[HandoffRecord]) -> None: ...

    def try_associate(self, ms_id: int, ap: int) -> bool: ...

    def psm_enter(self, ms_id: int) -> None: ...

    def psm_flush(self, ms_id: int) -> None: ...

    def psm_abandon(self, ms_id: int) -> None: ...

    def note_disconnected(self, ms_id: int) -> None: ...

    def count(self, name: str, ms_id: Optional[int] = None) -> None: ...


def active_scan(env: SchemeEnv, ms_id: int) -> Generator[Hold, None, ScanOutcome]:
    """Probe every channel: MinChannelTime, extended to MaxChannelTime when someone answers."""
    t = env.timing
    outcome = ScanOutcome()
    extension = (t.max_channel_time - t.min_channel_time).micros
    for channel in range(t.n_channels):
        yield Hold((t.t_switch + t.min_channel_time).micros, "probe_min", channel=channel)
        responders = env.heard_on_channel(ms_id, channel)
        if not responders:
            continue
        if extension:
            yield Hold(extension, "probe_extend", channel=channel)
        outcome.heard.update(responders)
    return outcome


def passive_scan(env: SchemeEnv, ms_id: int) -> Generator[Hold, None, ScanOutcome]:
    """Listen one beacon interval on every channel."""
    t = env.timing
    outcome = ScanOutcome()
    for channel in range(t.n_channels):
        yield Hold((t.t_switch + t.beacon_interval).micros, "beacon_dwell", channel=channel)
        outcome.heard.update(env.heard_on_channel(ms_id, channel))
    return outcome


def exchange_frames(
    env: SchemeEnv, ms_id: int, ap: int, frames: int, label: str
) -> Generator[Hold, None, None]:
    for _ in range(frames):
        yield Hold(env.access_delay(ms_id, ap).micros, label, ap=ap)


def choose_target(
    env: SchemeEnv,
    ms_id: int,
    heard: Iterable[tuple[int, Dbm]],
    policy: Optional["SelectionPolicy"],
) -> Optional[int]:
    """Next AP among scan responders, through ``policy`` when one is attached."""
    from roaming.selection import neighbor_candidates, select_next_ap, strongest

    current = env.current_ap(ms_id)
    usable = [(ap, rssi) for ap, rssi in heard if ap != current]
    if policy is None:
        return strongest(usable, env.thresholds.rssi_min)
    current_rssi = env.rssi(ms_id, current) if current is not None else float("-inf")
    picked = select_next_ap(neighbor_candidates(env.ctx, current, usable), current_rssi, policy)
    if picked is None:
        picked = strongest(usable, env.thresholds.rssi_min)
        if picked is not None:
            env.count("heuristic_fallbacks", ms_id)
    return picked


def full_handoff(
    env: SchemeEnv,
    ms_id: int,
    *,
    passive: bool = False,
    authenticate: bool = True,
    policy: Optional["SelectionPolicy"] = None,
) -> Generator[Hold, None, int]:
    """Scan, pick, (authenticate,) associate; rescan after a backoff until an AP accepts."""
    t = env.timing
    while True:
        scan = passive_scan(env, ms_id) if passive else active_scan(env, ms_id)
        outcome = yield from scan
        target = choose_target(env, ms_id, outcome.items(), policy)
        if target is None:
            env.note_disconnected(ms_id)
            yield Hold(t.retry_backoff.micros, "retry_backoff")
            continue
        if passive:
            yield Hold(
                (t.t_switch + env.access_delay(ms_id, target)).micros, "probe_selected", ap=target
            )
        if authenticate:
            yield from exchange_frames(env, ms_id, target, t.auth_frame_count, "auth_frame")
        yield from exchange_frames(env, ms_id, target, t.assoc_frames, "assoc_frame")
        if env.try_associate(ms_id, target):
            return target
        logger.debug("MS %d: AP %d refused association, rescanning", ms_id, target)
        env.count("association_refusals", ms_id)


class HandoffScheme:
    """Per-MS handoff logic driven by RSSI samples and timers."""

    kind: ClassVar[SchemeKind]

    def __init__(
        self, ms_id: int, env: SchemeEnv, policy: Optional["SelectionPolicy"] = None
    ) -> None:
        self.ms_id = ms_id
        self.env = env
        self.policy = policy
        self.pending: Optional[PendingHandoff] = None

    @property
    def in_handoff(self) -> bool:
        return self.pending is not None

    def start(self) -> None:
        """Called once the MS holds its first association."""

    def on_rssi(self, rssi: Dbm) -> None:
        raise NotImplementedError

    def on_timer(self, token: int) -> None:
        self.env.count("ignored_timers", self.ms_id)

    def _open(self, form: HandoffForm) -> PendingHandoff:
        self.pending = PendingHandoff(self.env.now, self.env.current_ap(self.ms_id), form)
        self.env.begin_handoff(self.ms_id)
        return self.pending

    def _close(self, to_ap: Optional[int]) -> Optional[HandoffRecord]:
        pending, self.pending = self.pending, None
        assert pending is not None
        record = None
        if to_ap is not None:
            record = HandoffRecord(
                ms_id=self.ms_id,
                from_ap=pending.from_ap,
                to_ap=to_ap,
                form=pending.form,
                trigger_time=pending.trigger_time,
                complete_time=self.env.now,
                components=tuple(pending.components),
                interrupted_prescan=pending.interrupted_prescan,
            )
        self.env.end_handoff(self.ms_id, record)
        return record
