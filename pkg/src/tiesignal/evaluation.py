"""Rank-biased overlap and the temporal, ego-disjoint 3-fold evaluation harness."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .baselines import BaselineKind, baseline_ranking, stable_seed
from .cdr import EventStore, PersonId
from .models import (
    ForestConfig,
    RecurrentConfig,
    comparator_of,
    generate_training_pairs,
    train_forest,
    train_recurrent,
)
from .pairwise import rank_with
from .survey import SurveyResponse, TieRanking, ground_truth, survey_waves

log = logging.getLogger(__name__)

MODEL_NAMES = ("random", "overlap", "duration", "recency", "frequency", "volume", "ensemble", "lstm")


@dataclass(frozen=True)
class RboParams:
    p: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("RBO persistence must lie in (0, 1)")


def _items(r) -> Sequence[PersonId]:
    return r.ordered_alters if isinstance(r, TieRanking) else list(r)


def rbo(pred, truth, params: RboParams = RboParams()) -> float:
    """Base (non-extrapolated) RBO evaluated to the depth of the longer list.

    Past its end the shorter list adds no new elements.
    """
    a, b = _items(pred), _items(truth)
    depth = max(len(a), len(b))
    if depth == 0:
        log.warning("rbo of two empty rankings; reporting 0")
        return 0.0
    p = params.p
    seen_a: set = set()
    seen_b: set = set()
    overlap = 0
    total = 0.0
    weight = 1.0
    for d in range(1, depth + 1):
        x = a[d - 1] if d <= len(a) else None
        y = b[d - 1] if d <= len(b) else None
        if x is not None and y is not None and x == y:
            overlap += 1
        else:
            if x is not None:
                overlap += x in seen_b
                seen_a.add(x)
            if y is not None:
                overlap += y in seen_a
                seen_b.add(y)
        if x is not None and x == y:
            seen_a.add(x)
            seen_b.add(y)
        total += weight * overlap / d
        weight *= p
    return (1.0 - p) * total


def rbo_ceiling(length: int, params: RboParams = RboParams()) -> float:
    """Score of a ranking against itself: ``1 - p**length``."""
    return rbo(list(range(length)), list(range(length)), params)


def weighted_ego_score(predictions: Mapping, truths: Mapping, params: RboParams = RboParams()) -> float | None:
    """Mean RBO over an ego's surveys weighted by ground-truth size; None without surveys."""
    if set(predictions) != set(truths):
        raise ValueError("predictions and truths must cover the same surveys")
    sizes = {k: len(_items(truths[k])) for k in truths}
    total = sum(sizes.values())
    if not truths or total == 0:
        return None
    return sum(sizes[k] * rbo(predictions[k], truths[k], params) for k in truths) / total


# -- ranking models --------------------------------------------------------

class RankingModel(Protocol):
    name: str

    def fit(self, rankings: list[TieRanking], store: EventStore, seed: int) -> None: ...

    def rank(self, store: EventStore, ego: PersonId, t: int) -> TieRanking: ...


@dataclass
class BaselineModel:
    kind: BaselineKind
    seed: int = 0

    @property
    def name(self) -> str:
        return self.kind.value

    def fit(self, rankings, store, seed) -> None:
        pass

    def rank(self, store, ego, t) -> TieRanking:
        return baseline_ranking(self.kind, store, ego, t, self.seed)


class _Untrained:
    """Comparator used before any training data exists: no preference."""

    def __call__(self, store, ego, i, j, t):
        return 0.5

    def pairwise(self, store, ego, alters, t):
        return np.full((len(alters), len(alters)), 0.5)


@dataclass
class LearnedModel:
    name: str
    forest: ForestConfig | None = None
    recurrent: RecurrentConfig | None = None
    model: object = None
    n_examples: int = 0

    def fit(self, rankings, store, seed) -> None:
        examples, _ = generate_training_pairs(rankings, store)
        self.n_examples = len(examples)
        if not examples:
            self.model = None
            return
        if self.forest is not None:
            self.model = train_forest(examples, store, self.forest, seed)
        else:
            self.model = train_recurrent(examples, store, self.recurrent or RecurrentConfig(), seed)

    def comparator(self):
        return _Untrained() if self.model is None else comparator_of(self.model)

    def rank(self, store, ego, t) -> TieRanking:
        return rank_with(self.comparator(), store, ego, t)[0]


@dataclass
class OracleModel:
    """Reads the survey ground truth directly; an upper bound for the harness."""

    truths: Mapping[tuple[PersonId, int], TieRanking]
    name: str = "oracle"

    def fit(self, rankings, store, seed) -> None:
        pass

    def rank(self, store, ego, t) -> TieRanking:
        truth = self.truths.get((ego, t))
        if truth is None:
            return TieRanking(ego, t, ())
        contacts = store.contacts_of(ego, t)
        return TieRanking(ego, t, tuple(a for a in truth.ordered_alters if a in contacts))


def default_models(seed: int = 0, forest: ForestConfig | None = None,
                   recurrent: RecurrentConfig | None = None, names: Iterable[str] = MODEL_NAMES) -> list:
    out = []
    for name in names:
        if name == "ensemble":
            out.append(LearnedModel("ensemble", forest=forest or ForestConfig()))
        elif name == "lstm":
            out.append(LearnedModel("lstm", recurrent=recurrent or RecurrentConfig()))
        else:
            out.append(BaselineModel(BaselineKind(name), seed))
    return out


# -- folds and harness -------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    groups: tuple[tuple[PersonId, ...], ...]
    cutoffs: tuple[int, ...]

    @classmethod
    def make(cls, egos: Iterable[PersonId], cutoffs: Iterable[int], seed: int, n_folds: int = 3) -> "FoldPlan":
        egos = sorted(set(egos))
        if len(egos) < n_folds:
            raise ValueError(f"need at least {n_folds} egos, got {len(egos)}")
        perm = np.random.default_rng(seed).permutation(len(egos))
        groups = tuple(tuple(sorted(egos[k] for k in part)) for part in np.array_split(perm, n_folds))
        return cls(groups, tuple(sorted(set(cutoffs))))

    def folds(self):
        for k, test in enumerate(self.groups):
            train = tuple(sorted(e for j, g in enumerate(self.groups) if j != k for e in g))
            yield k, train, test


@dataclass
class Dataset:
    store: EventStore
    surveys: list[SurveyResponse]

    @property
    def truths(self) -> dict[tuple[PersonId, int], TieRanking]:
        return ground_truth(self.surveys)

    @property
    def cutoffs(self) -> list[int]:
        return survey_waves(self.surveys)


@dataclass
class ModelScores:
    name: str
    fold_scores: list[float] = field(default_factory=list)
    ego_scores: dict[PersonId, float] = field(default_factory=dict)
    fold_of_ego: dict[PersonId, int] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def fold_variance(self) -> float:
        return float(np.var(self.fold_scores))

    @property
    def ego_variance(self) -> float:
        return float(np.var(list(self.ego_scores.values())))


@dataclass
class ScoreReport:
    seed: int
    rbo_p: float
    folds: list[list[PersonId]]
    models: dict[str, ModelScores]
    predictions: dict[str, dict[tuple[PersonId, int], TieRanking]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "rbo_p": self.rbo_p,
            "folds": self.folds,
            "models": {
                name: {
                    "mean_rbo": m.mean,
                    "fold_variance": m.fold_variance,
                    "ego_variance": m.ego_variance,
                    "fold_scores": m.fold_scores,
                    "ego_scores": dict(sorted(m.ego_scores.items())),
                }
                for name, m in self.models.items()
            },
        }

    def write_json(self, sink: IO[str]) -> None:
        json.dump(self.to_dict(), sink, indent=1)
        sink.write("\n")

    def write_leaderboard(self, sink: IO[str]) -> None:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["model", "mean_rbo", "variance", "ego_variance"])
        for name, m in self.models.items():
            w.writerow([name, f"{m.mean:.6f}", f"{m.fold_variance:.6f}", f"{m.ego_variance:.6f}"])


def _wave_of(t: int, cutoffs: Sequence[int]) -> int:
    for k, c in enumerate(cutoffs):
        if t <= c:
            return k
    raise ValueError(f"survey time {t} after the last wave cutoff")


def temporal_cv(dataset: Dataset, models: Sequence, seed: int, params: RboParams = RboParams(),
                n_folds: int = 3) -> ScoreReport:
    """Ego-disjoint k-fold evaluation, retraining learned models at every survey wave.

    At wave cutoff ``c`` a model trains on training-ego surveys taken at or
    before ``c`` (features always use events strictly before each survey),
    then ranks the test egos' surveys of that wave through store views that
    end at each survey's time. Test-ego ground truth is consulted only when
    scoring, after every prediction of the fold has been made.
    """
    truths = dataset.truths
    cutoffs = dataset.cutoffs
    plan = FoldPlan.make((s.ego for s in dataset.surveys), cutoffs, seed, n_folds)
    surveys_by_ego: dict[PersonId, list[SurveyResponse]] = {}
    for s in dataset.surveys:
        if s.answers:
            surveys_by_ego.setdefault(s.ego, []).append(s)

    report = ScoreReport(seed, params.p, [list(g) for g in plan.groups], {})
    for model in models:
        scores = ModelScores(model.name)
        preds: dict[tuple[PersonId, int], TieRanking] = {}
        for k, train, test in plan.folds():
            fold_preds: dict[tuple[PersonId, int], TieRanking] = {}
            for w, cutoff in enumerate(cutoffs):
                train_rankings = [truths[(e, s.time)] for e in train for s in surveys_by_ego.get(e, ())
                                  if s.time <= cutoff]
                model.fit(train_rankings, dataset.store.view_before(cutoff), stable_seed(seed, k, w, model.name))
                for e in test:
                    for s in surveys_by_ego.get(e, ()):
                        if _wave_of(s.time, cutoffs) == w:
                            fold_preds[(e, s.time)] = model.rank(dataset.store.view_before(s.time), e, s.time)
            # ground truth for the test egos is released only here
            ego_scores = []
            for e in test:
                keys = [(e, s.time) for s in surveys_by_ego.get(e, ())]
                score = weighted_ego_score({key: fold_preds[key] for key in keys}, {key: truths[key] for key in keys},
                                           params)
                if score is None:
                    continue
                scores.ego_scores[e] = score
                scores.fold_of_ego[e] = k
                ego_scores.append(score)
            scores.fold_scores.append(float(np.mean(ego_scores)) if ego_scores else float("nan"))
            preds.update(fold_preds)
        report.models[model.name] = scores
        report.predictions[model.name] = preds
        log.info("%s: mean RBO %.4f", model.name, scores.mean)
    return report


def ceiling_score(dataset: Dataset, params: RboParams = RboParams()) -> float:
    """Mean over egos of the size-weighted perfect-agreement RBO of their surveys."""
    per_ego: dict[PersonId, list[int]] = {}
    for s in dataset.surveys:
        if s.answers:
            per_ego.setdefault(s.ego, []).append(len(s.answers))
    vals = [sum(n * rbo_ceiling(n, params) for n in sizes) / sum(sizes) for sizes in per_ego.values()]
    return float(np.mean(vals))
