"""Call detail record ingestion and per-pair time-indexed storage.

CDR lines look like ``timestamp,sender,receiver,channel,magnitude`` with
``channel`` one of ``call``/``text`` (case-insensitive). An optional header
line starting with ``timestamp`` is skipped.

Every "before t" query in this module is strict (``timestamp < t``).
"""

from __future__ import annotations

import copy
import enum
import io
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

log = logging.getLogger(__name__)

PersonId = str


class ChannelKind(enum.Enum):
    CALL = "call"
    TEXT = "text"


class CdrParseError(ValueError):
    """A CDR line could not be turned into an event."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class CommEvent:
    timestamp: int
    sender: PersonId
    receiver: PersonId
    channel: ChannelKind
    magnitude: int

    def __post_init__(self):
        if not self.sender or not self.receiver:
            raise CdrParseError("empty person id")
        if self.sender == self.receiver:
            raise CdrParseError(f"self-loop on {self.sender!r}")
        if self.timestamp < 0:
            raise CdrParseError("negative timestamp")
        if self.magnitude < 0:
            raise CdrParseError("negative magnitude")

    def to_line(self) -> str:
        return f"{self.timestamp},{self.sender},{self.receiver},{self.channel.value},{self.magnitude}"


def _parse_int(token: str, what: str, lineno: int | None) -> int:
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        raise CdrParseError(f"non-numeric {what}: {token!r}", lineno) from None


def parse_cdr_line(line: str, lineno: int | None = None) -> CommEvent:
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != 5:
        raise CdrParseError(f"expected 5 fields, got {len(fields)}", lineno)
    ts_tok, sender, receiver, chan_tok, mag_tok = (f.strip() for f in fields)
    timestamp = _parse_int(ts_tok, "timestamp", lineno)
    magnitude = _parse_int(mag_tok, "magnitude", lineno)
    try:
        channel = ChannelKind(chan_tok.lower())
    except ValueError:
        raise CdrParseError(f"unknown channel {chan_tok!r}", lineno) from None
    try:
        return CommEvent(timestamp, sender, receiver, channel, magnitude)
    except CdrParseError as exc:
        raise CdrParseError(str(exc), lineno) from None


def pair_key(a: PersonId, b: PersonId) -> tuple[PersonId, PersonId]:
    return (a, b) if a <= b else (b, a)


@dataclass
class _PairIndex:
    events: list[CommEvent]
    times: np.ndarray
    call_times: np.ndarray
    text_times: np.ndarray

    @classmethod
    def build(cls, events: list[CommEvent]) -> "_PairIndex":
        times = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=len(events))
        is_call = np.fromiter((e.channel is ChannelKind.CALL for e in events), dtype=bool, count=len(events))
        for arr in (times, is_call):
            arr.setflags(write=False)
        call_times = times[is_call]
        text_times = times[~is_call]
        return cls(events, times, call_times, text_times)

    def channel_times(self, channel: ChannelKind | None) -> np.ndarray:
        if channel is None:
            return self.times
        return self.call_times if channel is ChannelKind.CALL else self.text_times


@dataclass
class LoadReport:
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


class EventStore:
    """Immutable index of communication events keyed by unordered person pair.

    ``participants`` are the persons whose outgoing traffic is fully logged
    (the study egos); everyone else is a non-participant.

    A store may carry a ``cutoff``: every query then behaves as if no event at
    or after the cutoff existed. :meth:`view_before` produces such views
    without copying the index.
    """

    def __init__(self, events: Iterable[CommEvent] = (), participants: Iterable[PersonId] = ()):
        # stable sort keeps input order for identical timestamps
        ordered = sorted(events, key=lambda e: e.timestamp)
        self._events: tuple[CommEvent, ...] = tuple(ordered)
        self._times = np.fromiter((e.timestamp for e in ordered), dtype=np.int64, count=len(ordered))
        grouped: dict[tuple[PersonId, PersonId], list[CommEvent]] = {}
        for ev in ordered:
            grouped.setdefault(pair_key(ev.sender, ev.receiver), []).append(ev)
        self._pairs = {k: _PairIndex.build(v) for k, v in grouped.items()}
        self._adjacent: dict[PersonId, set[PersonId]] = {}
        for a, b in self._pairs:
            self._adjacent.setdefault(a, set()).add(b)
            self._adjacent.setdefault(b, set()).add(a)
        self.participants = frozenset(participants)
        self.cutoff = float("inf")
        self.report = LoadReport(accepted=len(ordered))

    def view_before(self, t: float) -> "EventStore":
        """A read-only view hiding every event with timestamp >= ``t``."""
        view = copy.copy(self)
        view.cutoff = min(self.cutoff, t)
        return view

    def _bound(self, t: float) -> float:
        return t if t < self.cutoff else self.cutoff

    def _n_visible(self) -> int:
        return int(np.searchsorted(self._times, self.cutoff, side="left"))

    # -- basic accessors -------------------------------------------------
    def __len__(self) -> int:
        return self._n_visible()

    @property
    def events(self) -> tuple[CommEvent, ...]:
        return self._events[: self._n_visible()]

    @property
    def n_pairs(self) -> int:
        return sum(1 for _ in self.pairs())

    @property
    def persons(self) -> frozenset[PersonId]:
        seen = set(self.participants)
        for a, b in self.pairs():
            seen.add(a)
            seen.add(b)
        return frozenset(seen)

    @property
    def first_timestamp(self) -> int | None:
        return int(self._times[0]) if self._n_visible() else None

    @property
    def last_timestamp(self) -> int | None:
        n = self._n_visible()
        return int(self._times[n - 1]) if n else None

    def pairs(self) -> Iterator[tuple[PersonId, PersonId]]:
        return (k for k, idx in self._pairs.items() if idx.times[0] < self.cutoff)

    def partners(self, person: PersonId) -> frozenset[PersonId]:
        """Everyone who exchanged a visible event with ``person``."""
        return frozenset(self.contacts_of(person, self.cutoff))

    # -- time-bounded queries -------------------------------------------
    def pair_times(self, a: PersonId, b: PersonId, t_end: float, channel: ChannelKind | None = None) -> np.ndarray:
        """Sorted timestamps of events between a and b strictly before ``t_end``."""
        idx = self._pairs.get(pair_key(a, b))
        if idx is None:
            return np.empty(0, dtype=np.int64)
        times = idx.channel_times(channel)
        return times[: int(np.searchsorted(times, self._bound(t_end), side="left"))]

    def pair_count(self, a: PersonId, b: PersonId, t_end: float, channel: ChannelKind | None = None) -> int:
        idx = self._pairs.get(pair_key(a, b))
        if idx is None:
            return 0
        return int(np.searchsorted(idx.channel_times(channel), self._bound(t_end), side="left"))

    def pair_timeline(self, a: PersonId, b: PersonId, t_end: float) -> list[CommEvent]:
        if t_end < 0:
            raise ValueError("t_end must be non-negative")
        idx = self._pairs.get(pair_key(a, b))
        if idx is None:
            return []
        return idx.events[: int(np.searchsorted(idx.times, self._bound(t_end), side="left"))]

    def contacts_of(self, ego: PersonId, t: float) -> set[PersonId]:
        t = self._bound(t)
        return {o for o in self._adjacent.get(ego, ()) if self._pairs[pair_key(ego, o)].times[0] < t}

    def weighted_neighbors(self, p: PersonId, t: float) -> tuple[dict[PersonId, int], int]:
        """Per-neighbor event counts before ``t`` and their total (node strength)."""
        weights = {}
        for other in self._adjacent.get(p, ()):
            n = self.pair_count(p, other, t)
            if n:
                weights[other] = n
        return weights, sum(weights.values())

    def truncated(self, t: float) -> "EventStore":
        """A freshly built store holding only the events strictly before ``t``."""
        cut = int(np.searchsorted(self._times, self._bound(t), side="left"))
        return EventStore(self._events[:cut], self.participants)

    def without(self, persons: Iterable[PersonId]) -> "EventStore":
        """A freshly built store with every event touching ``persons`` removed."""
        drop = set(persons)
        kept = [e for e in self.events if e.sender not in drop and e.receiver not in drop]
        return EventStore(kept, self.participants - drop)


def iter_cdr_lines(lines: Iterable[str], report: LoadReport) -> Iterator[CommEvent]:
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if lineno == 1 and stripped.lower().startswith("timestamp"):
            continue
        try:
            yield parse_cdr_line(stripped, lineno)
        except CdrParseError as exc:
            log.warning("rejected CDR %s", exc)
            report.rejected.append((lineno, str(exc)))


def load_events(source: IO[bytes] | IO[str] | str, participants: Iterable[PersonId] = ()) -> EventStore:
    """Load a CDR stream (binary, text or a path) into an :class:`EventStore`.

    Malformed lines are skipped and recorded on ``store.report``.
    """
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return load_events(fh, participants)
    try:
        raw = source.read()
    except OSError as exc:
        raise OSError(f"unreadable CDR source: {exc}") from exc
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    report = LoadReport()
    events = list(iter_cdr_lines(io.StringIO(text), report))
    store = EventStore(events, participants)
    report.accepted = len(events)
    store.report = report
    return store


def dump_events(events: Iterable[CommEvent], sink: IO[str], header: bool = True) -> None:
    if header:
        sink.write("timestamp,sender,receiver,channel,magnitude\n")
    for ev in events:
        sink.write(ev.to_line() + "\n")
