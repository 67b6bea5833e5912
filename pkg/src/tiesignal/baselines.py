"""Single-attribute tie scorers.

Each scorer looks only at events strictly before ``t``. Higher scores mean a
stronger predicted tie, so recency is returned negated.
"""

from __future__ import annotations

import enum
import zlib
from typing import Iterable

import numpy as np

from .cdr import ChannelKind, EventStore, PersonId
from .survey import TieRanking


class BaselineKind(enum.Enum):
    RANDOM = "random"
    OVERLAP = "overlap"
    DURATION = "duration"
    RECENCY = "recency"
    FREQUENCY = "frequency"
    VOLUME = "volume"


class NoHistoryError(ValueError):
    """The pair has no event before the evaluation time."""


def _history(store: EventStore, ego: PersonId, alter: PersonId, t: float, channel: ChannelKind | None) -> np.ndarray:
    times = store.pair_times(ego, alter, t, channel)
    if times.size == 0:
        raise NoHistoryError(f"no events between {ego} and {alter} before {t}")
    return times


def frequency_score(store: EventStore, ego: PersonId, alter: PersonId, t: float,
                    channel: ChannelKind | None = None) -> float:
    """Events per second since the pair first communicated."""
    times = _history(store, ego, alter, t, channel)
    return times.size / (t - float(times[0]))


def recency_score(store: EventStore, ego: PersonId, alter: PersonId, t: float,
                  channel: ChannelKind | None = None) -> float:
    times = _history(store, ego, alter, t, channel)
    return -(t - float(times[-1]))


def duration_score(store: EventStore, ego: PersonId, alter: PersonId, t: float,
                   channel: ChannelKind | None = None) -> float:
    times = _history(store, ego, alter, t, channel)
    return t - float(times[0])


def volume_score(store: EventStore, ego: PersonId, alter: PersonId, t: float,
                 channel: ChannelKind | None = None) -> float:
    return float(store.pair_count(ego, alter, t, channel))


def weighted_overlap(store: EventStore, i: PersonId, j: PersonId, t: float) -> tuple[float, bool]:
    """Bow-tie weighted overlap of i and j, plus a flag for a zero denominator.

    Shared neighbours k contribute ``w_ik + w_jk`` to the numerator; the
    denominator is ``s_i + s_j - 2 w_ij`` where ``s`` is node strength.
    """
    w_i, s_i = store.weighted_neighbors(i, t)
    w_j, s_j = store.weighted_neighbors(j, t)
    denom = s_i + s_j - 2 * w_i.get(j, 0)
    if denom <= 0:
        return 0.0, True
    shared = (w_i.keys() & w_j.keys()) - {i, j}
    num = sum(w_i[k] + w_j[k] for k in shared)
    return num / denom, False


def overlap_score(store: EventStore, i: PersonId, j: PersonId, t: float) -> float:
    return weighted_overlap(store, i, j, t)[0]


def stable_seed(*parts) -> int:
    """Process-independent integer seed from arbitrary printable parts."""
    return zlib.crc32("\x1f".join(str(p) for p in parts).encode("utf-8"))


def random_ranking(contacts: Iterable[PersonId], seed: int, ego: PersonId = "", time: int = 0) -> TieRanking:
    items = sorted(contacts)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    return TieRanking(ego, time, tuple(items[k] for k in order))


SCORERS = {
    BaselineKind.FREQUENCY: frequency_score,
    BaselineKind.RECENCY: recency_score,
    BaselineKind.DURATION: duration_score,
    BaselineKind.VOLUME: volume_score,
}


def baseline_score(kind: BaselineKind, store: EventStore, ego: PersonId, alter: PersonId, t: float) -> float:
    if kind is BaselineKind.OVERLAP:
        return overlap_score(store, ego, alter, t)
    if kind is BaselineKind.RANDOM:
        raise ValueError("the random baseline has no per-alter score")
    return SCORERS[kind](store, ego, alter, t)


def baseline_ranking(kind: BaselineKind, store: EventStore, ego: PersonId, t: int, seed: int = 0) -> TieRanking:
    contacts = store.contacts_of(ego, t)
    if kind is BaselineKind.RANDOM:
        return random_ranking(contacts, stable_seed(seed, ego, t), ego, t)
    scores = {a: baseline_score(kind, store, ego, a, t) for a in contacts}
    order = sorted(contacts, key=lambda a: (-scores[a], a))
    return TieRanking(ego, t, tuple(order))
