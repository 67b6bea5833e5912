"""Pairwise comparisons to rankings and tie-strength signals via Borda count.

A comparator estimates, for one ego at time ``t``, the probability that
alter ``i`` has the stronger tie than alter ``j``. Raw outputs are
symmetrised into a tournament matrix ``M`` (``M[i,j] + M[j,i] == 1``,
diagonal ``1/2``), signed, and tallied per alter. The normalised tally
(winning percentage) is the tie-strength signal.

This module also builds the model inputs: 8-dimensional per-channel baseline
feature vectors and 21-day binned call/text count series.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol, Sequence

import numpy as np

from .baselines import (
    BaselineKind,
    NoHistoryError,
    baseline_score,
    duration_score,
    frequency_score,
    recency_score,
    volume_score,
)
from .cdr import ChannelKind, EventStore, PersonId
from .survey import TieRanking

DAY = 86400
BIN_DAYS = 21
MAX_BINS = 64
N_FEATURES = 8
FEATURE_NAMES = tuple(
    f"{name}_{chan}" for chan in ("call", "text") for name in ("frequency", "recency", "duration", "volume")
)


class Comparator(Protocol):
    def __call__(self, store: EventStore, ego: PersonId, i: PersonId, j: PersonId, t: float) -> float: ...


class ComparatorError(RuntimeError):
    def __init__(self, ego, i, j, t, cause):
        self.pair = (i, j)
        super().__init__(f"comparator failed for ego={ego} i={i} j={j} t={t}: {cause}")


@dataclass(frozen=True)
class PairwiseMatrix:
    alters: tuple[PersonId, ...]
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.alters)

    def to_json(self) -> str:
        return json.dumps({"alters": list(self.alters), "M": self.values.tolist()})


def symmetrize(raw: np.ndarray) -> np.ndarray:
    """Average ``p_ij`` with ``1 - p_ji``; the result sums to exactly 1 across the diagonal.

    The entry on the winning side of each pair is computed and its partner
    is the exact complement, so the signs of ``M - 1/2`` are antisymmetric.
    """
    raw = np.asarray(raw, dtype=float)
    d = raw - raw.T
    upper = 0.5 + np.abs(d) / 2.0
    lower = 1.0 - upper
    m = np.where(d >= 0, upper, lower)
    np.fill_diagonal(m, 0.5)
    return m


def raw_comparisons(comparator, store: EventStore, ego: PersonId, alters: Sequence[PersonId], t: float) -> np.ndarray:
    n = len(alters)
    batch = getattr(comparator, "pairwise", None)
    if batch is not None:
        raw = np.array(batch(store, ego, list(alters), t), dtype=float)
    else:
        raw = np.full((n, n), 0.5)
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                try:
                    raw[a, b] = comparator(store, ego, alters[a], alters[b], t)
                except Exception as exc:
                    raise ComparatorError(ego, alters[a], alters[b], t, exc) from exc
    if raw.shape != (n, n):
        raise ValueError(f"comparator returned shape {raw.shape}, expected {(n, n)}")
    return raw


def build_matrix(comparator, store: EventStore, ego: PersonId, alters: Sequence[PersonId], t: float) -> PairwiseMatrix:
    if len(set(alters)) != len(alters):
        raise ValueError("alters must be distinct")
    raw = raw_comparisons(comparator, store, ego, alters, t)
    return PairwiseMatrix(tuple(alters), symmetrize(raw))


def sign_matrix(m: PairwiseMatrix | np.ndarray) -> np.ndarray:
    values = m.values if isinstance(m, PairwiseMatrix) else np.asarray(m)
    return np.sign(values - 0.5).astype(np.int64)


@dataclass(frozen=True)
class BordaResult:
    borda: np.ndarray
    wins: np.ndarray
    losses: np.ndarray
    ties: np.ndarray

    @property
    def n(self) -> int:
        return len(self.borda)


def borda_counts(mp: np.ndarray) -> BordaResult:
    mp = np.asarray(mp)
    n = mp.shape[0]
    off = ~np.eye(n, dtype=bool)
    wins = ((mp == 1) & off).sum(axis=1)
    losses = ((mp == -1) & off).sum(axis=1)
    ties = ((mp == 0) & off).sum(axis=1)
    return BordaResult(mp.sum(axis=1) - np.diag(mp), wins, losses, ties)


def winning_percentage(borda, n: int):
    """Normalised Borda count in [0, 1]; 0.5 when there is nobody to compare with."""
    if n < 2:
        return np.full(np.shape(borda), 0.5) if np.ndim(borda) else 0.5
    return (borda + (n - 1)) / (2 * (n - 1))


def winning_percentage_from_record(wins, losses, ties):
    return (wins + 0.5 * ties) / (wins + losses + ties)


def rank_from_borda(result: BordaResult, m: PairwiseMatrix, ego: PersonId = "", time: int = 0) -> TieRanking:
    mass = m.values.sum(axis=1)
    order = sorted(range(m.n), key=lambda k: (-int(result.borda[k]), -float(mass[k]), m.alters[k]))
    return TieRanking(ego, time, tuple(m.alters[k] for k in order))


def rank_with(comparator, store: EventStore, ego: PersonId, t: int) -> tuple[TieRanking, PairwiseMatrix, BordaResult]:
    """Rank every contact of ``ego`` before ``t`` with ``comparator``."""
    alters = sorted(store.contacts_of(ego, t))
    m = build_matrix(comparator, store, ego, alters, t)
    result = borda_counts(sign_matrix(m))
    return rank_from_borda(result, m, ego, t), m, result


# -- features -------------------------------------------------------------

def feature_vector(store: EventStore, ego: PersonId, alter: PersonId, t: float) -> np.ndarray:
    """[frequency, recency, duration, volume] for calls, then for texts.

    A channel with no events gets frequency 0, duration 0, volume 0 and a
    recency of minus the time since the start of the data.
    """
    if store.pair_count(ego, alter, t) == 0:
        raise NoHistoryError(f"no events between {ego} and {alter} before {t}")
    t0 = store.first_timestamp
    out = np.empty(N_FEATURES)
    for c, chan in enumerate((ChannelKind.CALL, ChannelKind.TEXT)):
        base = 4 * c
        if store.pair_count(ego, alter, t, chan) == 0:
            out[base: base + 4] = (0.0, -(t - t0), 0.0, 0.0)
            continue
        out[base] = frequency_score(store, ego, alter, t, chan)
        out[base + 1] = recency_score(store, ego, alter, t, chan)
        out[base + 2] = duration_score(store, ego, alter, t, chan)
        out[base + 3] = volume_score(store, ego, alter, t, chan)
    return out


def difference_features(f_x: np.ndarray, f_y: np.ndarray) -> np.ndarray:
    return np.asarray(f_x, dtype=float) - np.asarray(f_y, dtype=float)


@dataclass(frozen=True)
class BinnedSeries:
    """Call (column 0) and text (column 1) counts per bin, oldest bin first."""

    counts: np.ndarray
    end: float
    bin_seconds: int = BIN_DAYS * DAY

    def __len__(self) -> int:
        return self.counts.shape[0]


def binned_timeseries(store: EventStore, ego: PersonId, alter: PersonId, t: float,
                      bin_days: int = BIN_DAYS, max_bins: int = MAX_BINS) -> BinnedSeries:
    width = bin_days * DAY
    all_times = store.pair_times(ego, alter, t)
    if all_times.size == 0:
        raise NoHistoryError(f"no events between {ego} and {alter} before {t}")
    n_bins = min(max_bins, max(1, math.ceil((t - float(all_times[0])) / width)))
    counts = np.zeros((n_bins, 2), dtype=np.int64)
    for c, chan in enumerate((ChannelKind.CALL, ChannelKind.TEXT)):
        times = store.pair_times(ego, alter, t, chan)
        # bin 0 counted from the end covers (t - width, t)
        from_end = np.ceil((t - times.astype(float)) / width).astype(np.int64) - 1
        from_end = from_end[from_end < n_bins]
        np.add.at(counts[:, c], n_bins - 1 - from_end, 1)
    return BinnedSeries(counts, float(t), width)


def stacked_series(s_i: BinnedSeries, s_j: BinnedSeries) -> np.ndarray:
    """Four-channel (T, 4) series: i's call/text above j's, left-padded to equal length."""
    if s_i.end != s_j.end:
        raise ValueError("series must end at the same time")
    length = max(len(s_i), len(s_j))
    out = np.zeros((length, 4), dtype=np.int64)
    out[length - len(s_i):, 0:2] = s_i.counts
    out[length - len(s_j):, 2:4] = s_j.counts
    return out


# -- baseline scores as comparators ---------------------------------------

@dataclass
class ScoreComparator:
    """Hard comparator from a single-attribute baseline: 1, 1/2 or 0."""

    kind: BaselineKind

    def __call__(self, store, ego, i, j, t) -> float:
        si = baseline_score(self.kind, store, ego, i, t)
        sj = baseline_score(self.kind, store, ego, j, t)
        return 1.0 if si > sj else (0.5 if si == sj else 0.0)

    def pairwise(self, store, ego, alters, t) -> np.ndarray:
        s = np.array([baseline_score(self.kind, store, ego, a, t) for a in alters])
        return np.where(s[:, None] > s[None, :], 1.0, np.where(s[:, None] == s[None, :], 0.5, 0.0))


# -- signals ---------------------------------------------------------------

@dataclass
class TieSignal:
    ego: PersonId
    alter: PersonId
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def append(self, time: float, value: float) -> None:
        if self.times and time <= self.times[-1]:
            raise ValueError("signal times must be strictly increasing")
        self.times.append(time)
        self.values.append(value)

    def __len__(self) -> int:
        return len(self.times)

    def at(self, time: float) -> float | None:
        try:
            return self.values[self.times.index(time)]
        except ValueError:
            return None


def signal_series(comparator, store: EventStore, ego: PersonId, t_grid: Iterable[float]) -> dict[PersonId, TieSignal]:
    signals: dict[PersonId, TieSignal] = {}
    last = -math.inf
    for t in t_grid:
        if t <= last:
            raise ValueError("t_grid must be strictly increasing")
        last = t
        alters = sorted(store.contacts_of(ego, t))
        if not alters:
            continue
        m = build_matrix(comparator, store, ego, alters, t)
        result = borda_counts(sign_matrix(m))
        wp = winning_percentage(result.borda, m.n)
        for a, v in zip(alters, np.atleast_1d(wp)):
            signals.setdefault(a, TieSignal(ego, a)).append(t, float(v))
    return signals


def signal_grid(start: float, end: float, cadence_days: int = BIN_DAYS, extra: Iterable[float] = ()) -> list[float]:
    """Sampling times every ``cadence_days`` in (start, end], merged with ``extra``."""
    step = cadence_days * DAY
    grid = set(float(x) for x in np.arange(start + step, end + 1, step))
    grid.update(float(x) for x in extra)
    return sorted(grid)


def write_signals_csv(signals: Iterable[TieSignal], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["ego", "alter", "time", "value"])
    for sig in signals:
        for t, v in zip(sig.times, sig.values):
            w.writerow([sig.ego, sig.alter, int(t), repr(float(v))])


def read_signals_csv(source: IO[str]) -> dict[tuple[PersonId, PersonId], TieSignal]:
    out: dict[tuple[PersonId, PersonId], TieSignal] = {}
    for row in csv.DictReader(source):
        key = (row["ego"], row["alter"])
        out.setdefault(key, TieSignal(*key)).append(float(row["time"]), float(row["value"]))
    return out
