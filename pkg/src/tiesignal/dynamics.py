"""Analyses of evolving tie-strength signals.

Signals are keyed by directed edge ``(ego, alter)`` and sampled on a common
time grid (see :func:`tiesignal.pairwise.signal_series`).
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import theilslopes

from .cdr import EventStore, PersonId
from .pairwise import TieSignal
from .survey import Gender, Relation, SurveyResponse

Edge = tuple[PersonId, PersonId]


def relation_labels(surveys: Iterable[SurveyResponse]) -> dict[Edge, Relation]:
    """Most frequent label each ego gave each alter; later surveys win count ties."""
    counts: dict[Edge, Counter] = {}
    latest: dict[Edge, dict[Relation, int]] = {}
    for s in sorted(surveys, key=lambda s: s.time):
        for a in s.answers:
            key = (s.ego, a.alter)
            counts.setdefault(key, Counter())[a.relation] += 1
            latest.setdefault(key, {})[a.relation] = s.time
    return {k: max(c, key=lambda r: (c[r], latest[k][r])) for k, c in counts.items()}


def genders_from(surveys: Iterable[SurveyResponse]) -> dict[PersonId, Gender]:
    out: dict[PersonId, Gender] = {}
    for s in surveys:
        if s.ego_gender is not Gender.UNSPECIFIED:
            out[s.ego] = s.ego_gender
        for a in s.answers:
            if a.gender is not Gender.UNSPECIFIED:
                out.setdefault(a.alter, a.gender)
    return out


# -- relationship classes -------------------------------------------------

@dataclass
class RelationClassSeries:
    relation: Relation
    times: list[float]
    means: list[float | None]
    counts: list[int]

    def values(self) -> np.ndarray:
        return np.array([m for m in self.means if m is not None])


def relation_class_series(signals: Mapping[Edge, TieSignal], labels: Mapping[Edge, Relation],
                          grid: Sequence[float]) -> dict[Relation, RelationClassSeries]:
    out = {}
    for rel in Relation:
        edges = [e for e in signals if labels.get(e) is rel]
        means, counts = [], []
        for t in grid:
            vals = [v for v in (signals[e].at(t) for e in edges) if v is not None]
            counts.append(len(vals))
            means.append(float(np.mean(vals)) if vals else None)
        if edges:
            out[rel] = RelationClassSeries(rel, list(grid), means, counts)
    return out


def edge_volatility(signals: Mapping[Edge, TieSignal], labels: Mapping[Edge, Relation],
                    min_samples: int = 3) -> dict[Relation, float]:
    """Mean over a class's edges of each edge's variance across time."""
    per_class: dict[Relation, list[float]] = {}
    for e, sig in signals.items():
        rel = labels.get(e)
        if rel is None or len(sig) < min_samples:
            continue
        per_class.setdefault(rel, []).append(float(np.var(sig.values)))
    return {r: float(np.mean(v)) for r, v in per_class.items()}


# -- transitions -----------------------------------------------------------

@dataclass(frozen=True)
class TransitionStat:
    ego: PersonId
    alter: PersonId
    index: int
    difference: float


def transition_stat(signal: TieSignal) -> TransitionStat | None:
    """Largest consecutive jump and mean(after) - mean(up to and including the jump's start).

    Returns None for signals with fewer than three samples.
    """
    v = np.asarray(signal.values, dtype=float)
    if len(v) < 3:
        return None
    k = int(np.argmax(np.abs(np.diff(v))))
    return TransitionStat(signal.ego, signal.alter, k, float(v[k + 1:].mean() - v[:k + 1].mean()))


def transition_differences(signals: Mapping[Edge, TieSignal], labels: Mapping[Edge, Relation]
                           ) -> tuple[dict[Relation, list[float]], int]:
    out: dict[Relation, list[float]] = {}
    skipped = 0
    for e, sig in signals.items():
        rel = labels.get(e)
        if rel is None:
            continue
        stat = transition_stat(sig)
        if stat is None:
            skipped += 1
            continue
        out.setdefault(rel, []).append(stat.difference)
    return out, skipped


@dataclass
class GaussianKDE:
    """Gaussian kernel mixture; bandwidth from Silverman's rule unless given.

    With zero sample spread the estimate is flagged ``degenerate`` and drawn
    as a narrow spike of width ``spike_width``; a rule-of-thumb bandwidth is
    never allowed below that width.
    """

    samples: np.ndarray
    bandwidth: float
    degenerate: bool = False

    spike_width = 1e-3

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.samples) / self.bandwidth
        return np.exp(-0.5 * z * z).sum(axis=-1) / (len(self.samples) * self.bandwidth * math.sqrt(2 * math.pi))

    def grid(self, n: int = 201, span: float = 4.0) -> np.ndarray:
        lo = self.samples.min() - span * self.bandwidth
        hi = self.samples.max() + span * self.bandwidth
        return np.linspace(lo, hi, n)

    def modes(self, n: int = 1001) -> list[float]:
        xs = self.grid(n)
        ys = self(xs)
        peaks = [k for k in range(1, n - 1) if ys[k] >= ys[k - 1] and ys[k] > ys[k + 1]]
        return [float(xs[k]) for k in sorted(peaks, key=lambda k: -ys[k])]


def silverman_bandwidth(samples: np.ndarray) -> float:
    x = np.asarray(samples, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * len(x) ** (-0.2)


def gaussian_kde(samples: Iterable[float], bandwidth: float | None = None) -> GaussianKDE:
    x = np.asarray(list(samples), dtype=float)
    if len(x) < 1:
        raise ValueError("need at least one sample")
    if len(x) < 2 or np.ptp(x) == 0:
        return GaussianKDE(x, bandwidth or GaussianKDE.spike_width, degenerate=True)
    bw = bandwidth if bandwidth is not None else max(silverman_bandwidth(x), GaussianKDE.spike_width)
    return GaussianKDE(x, bw)


# -- triads ------------------------------------------------------------------

class MotifLabel(enum.Enum):
    TWO_AGAINST_ONE = "TwoAgainstOne"
    WEAK_LINK = "WeakLink"
    EQUALIST = "Equalist"


@dataclass(frozen=True)
class Triad:
    nodes: tuple[PersonId, PersonId, PersonId]
    semesters: tuple[bool, ...] = field(default=())

    def directed_edges(self) -> list[Edge]:
        return [(a, b) for a in self.nodes for b in self.nodes if a != b]


def semester_intervals(cutoffs: Sequence[float], start: float) -> list[tuple[float, float]]:
    """Half-open intervals [start, c0), [c0, c1), ... ending at each survey wave."""
    bounds = [start, *cutoffs]
    return [(bounds[k], bounds[k + 1]) for k in range(len(cutoffs))]


def extract_stable_triads(store: EventStore, semesters: Sequence[tuple[float, float]], min_events: int = 3,
                          participants: Iterable[PersonId] | None = None) -> list[Triad]:
    """Participant triangles whose three pairs each have ``min_events`` events in every semester."""
    if not semesters:
        raise ValueError("need at least one semester")
    if min_events < 1:
        raise ValueError("min_events must be >= 1")
    people = set(store.participants if participants is None else participants)

    def stable(a, b) -> bool:
        times = store.pair_times(a, b, math.inf)
        for lo, hi in semesters:
            n = int(np.searchsorted(times, hi, side="left") - np.searchsorted(times, lo, side="left"))
            if n < min_events:
                return False
        return True

    adj: dict[PersonId, set[PersonId]] = {p: set() for p in people}
    for a in sorted(people):
        for b in store.partners(a):
            if b in people and a < b and stable(a, b):
                adj[a].add(b)
                adj[b].add(a)
    triads = []
    for a in sorted(people):
        for b, c in combinations(sorted(x for x in adj[a] if x > a), 2):
            if c in adj[b]:
                triads.append(Triad((a, b, c), tuple(True for _ in semesters)))
    return triads


def _edge_value(signals: Mapping[Edge, TieSignal], edge: Edge, t: float) -> float | None:
    sig = signals.get(edge)
    return None if sig is None else sig.at(t)


def triad_type(triad: Triad, genders: Mapping[PersonId, Gender]) -> tuple[str, PersonId, PersonId, PersonId] | None:
    """("MMF" | "FFM", majority_a, majority_b, minority) for mixed-gender triads."""
    g = [genders.get(p, Gender.UNSPECIFIED) for p in triad.nodes]
    if Gender.UNSPECIFIED in g:
        return None
    n_m = g.count(Gender.M)
    if n_m not in (1, 2):
        return None
    major = Gender.M if n_m == 2 else Gender.F
    maj = [p for p, x in zip(triad.nodes, g) if x is major]
    minority = next(p for p, x in zip(triad.nodes, g) if x is not major)
    return ("MMF" if major is Gender.M else "FFM", maj[0], maj[1], minority)


def gender_asymmetry(triads: Sequence[Triad], signals: Mapping[Edge, TieSignal], genders: Mapping[PersonId, Gender],
                     grid: Sequence[float]) -> dict[str, list[float | None]]:
    """Per mixed-triad type and time, mean of |within-majority mean - majority-to-minority mean|."""
    typed = [x for x in (triad_type(tr, genders) for tr in triads) if x is not None]
    out: dict[str, list[float | None]] = {"MMF": [], "FFM": []}
    for t in grid:
        acc: dict[str, list[float]] = {"MMF": [], "FFM": []}
        for kind, a, b, m in typed:
            vals = [_edge_value(signals, e, t) for e in ((a, b), (b, a), (a, m), (b, m))]
            if any(v is None for v in vals):
                continue
            acc[kind].append(abs((vals[0] + vals[1]) / 2 - (vals[2] + vals[3]) / 2))
        for kind in out:
            out[kind].append(float(np.mean(acc[kind])) if acc[kind] else None)
    return out


def classify_strengths(strengths: Sequence[float], epsilon: float = 0.1) -> MotifLabel:
    s1, s2, s3 = sorted(strengths)
    if s3 - s1 <= epsilon:
        return MotifLabel.EQUALIST
    if s2 - s1 > epsilon and s3 - s2 <= epsilon:
        return MotifLabel.WEAK_LINK
    return MotifLabel.TWO_AGAINST_ONE


def pair_strengths(nodes: Sequence[PersonId], values: Mapping[Edge, float]) -> list[float]:
    a, b, c = nodes
    return [(values[(x, y)] + values[(y, x)]) / 2 for x, y in ((a, b), (a, c), (b, c))]


def classify_motif(nodes: Sequence[PersonId], values: Mapping[Edge, float], epsilon: float = 0.1) -> MotifLabel:
    """Motif of a triad from its six directed edge values at one time."""
    missing = [(x, y) for x in nodes for y in nodes if x != y and (x, y) not in values]
    if missing:
        raise KeyError(f"missing directed edges {missing}")
    return classify_strengths(pair_strengths(nodes, values), epsilon)


def motif_counts(triads: Sequence[Triad], signals: Mapping[Edge, TieSignal], grid: Sequence[float],
                 epsilon: float = 0.1) -> tuple[dict[MotifLabel, list[int]], list[int]]:
    """Per-time motif tallies and the number of classifiable triads at each time."""
    counts = {m: [] for m in MotifLabel}
    classifiable = []
    for t in grid:
        tally = Counter()
        n = 0
        for tr in triads:
            vals = {e: _edge_value(signals, e, t) for e in tr.directed_edges()}
            if any(v is None for v in vals.values()):
                continue
            tally[classify_motif(tr.nodes, vals, epsilon)] += 1
            n += 1
        for m in MotifLabel:
            counts[m].append(tally[m])
        classifiable.append(n)
    return counts, classifiable


def trend_slope(times: Sequence[float], values: Sequence[float]) -> float:
    """Theil-Sen slope of ``values`` against ``times``."""
    return float(theilslopes(np.asarray(values, dtype=float), np.asarray(times, dtype=float))[0])
