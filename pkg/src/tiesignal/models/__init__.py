"""Pairwise comparators learned from survey rankings.

``train_forest`` and ``train_recurrent`` turn training examples plus the
event store into fitted models; :func:`comparator_of` adapts either model to
the comparator interface used by :mod:`tiesignal.pairwise`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..cdr import EventStore
from ..pairwise import MAX_BINS, binned_timeseries, feature_vector, stacked_series
from .forest import ForestConfig, ForestModel, fit_forest, forest_predict
from .recurrent import RecurrentComparator, RecurrentConfig, TrainingDivergedError, fit_recurrent, recurrent_forward
from .training import TrainingExample, generate_training_pairs, subsample_examples

__all__ = [
    "ForestConfig", "ForestModel", "RecurrentComparator", "RecurrentConfig", "TrainingDivergedError",
    "TrainingExample", "comparator_of", "forest_predict", "generate_training_pairs", "load_model",
    "recurrent_forward", "train_forest", "train_recurrent",
]


def _feature_cache(store: EventStore):
    cache: dict[tuple, np.ndarray] = {}

    def get(ego, alter, t):
        key = (ego, alter, t)
        if key not in cache:
            cache[key] = feature_vector(store, ego, alter, t)
        return cache[key]

    return get


def _series_cache(store: EventStore):
    cache = {}

    def get(ego, alter, t):
        key = (ego, alter, t)
        if key not in cache:
            cache[key] = binned_timeseries(store, ego, alter, t, max_bins=MAX_BINS)
        return cache[key]

    return get


def forest_design(examples: list[TrainingExample], store: EventStore) -> tuple[np.ndarray, np.ndarray]:
    feat = _feature_cache(store)
    X = np.array([feat(e.ego, e.first, e.time) - feat(e.ego, e.second, e.time) for e in examples])
    y = np.array([e.label for e in examples], dtype=np.int64)
    return X.reshape(len(examples), -1), y


def recurrent_design(examples: list[TrainingExample], store: EventStore) -> tuple[list[np.ndarray], np.ndarray]:
    series = _series_cache(store)
    seqs = [stacked_series(series(e.ego, e.first, e.time), series(e.ego, e.second, e.time)) for e in examples]
    return seqs, np.array([e.label for e in examples], dtype=float)


def train_forest(examples: list[TrainingExample], store: EventStore, config: ForestConfig = ForestConfig(),
                 seed: int = 0) -> ForestModel:
    if not examples:
        raise ValueError("empty training set")
    examples = subsample_examples(examples, config.max_pairs, seed)
    X, y = forest_design(examples, store)
    return fit_forest(X, y, config, seed)


def train_recurrent(examples: list[TrainingExample], store: EventStore,
                    config: RecurrentConfig = RecurrentConfig(), seed: int = 0) -> RecurrentComparator:
    if not examples:
        raise ValueError("empty training set")
    examples = subsample_examples(examples, config.max_pairs, seed)
    seqs, y = recurrent_design(examples, store)
    return fit_recurrent(seqs, y, config, seed)


@dataclass
class ForestComparator:
    model: ForestModel

    def __call__(self, store, ego, i, j, t) -> float:
        return forest_predict(self.model, feature_vector(store, ego, i, t) - feature_vector(store, ego, j, t))

    def pairwise(self, store, ego, alters, t) -> np.ndarray:
        n = len(alters)
        F = np.array([feature_vector(store, ego, a, t) for a in alters]).reshape(n, -1)
        D = (F[:, None, :] - F[None, :, :]).reshape(n * n, -1)
        return self.model.predict_proba(D).reshape(n, n)


@dataclass
class LstmComparator:
    model: RecurrentComparator

    def __call__(self, store, ego, i, j, t) -> float:
        s_i = binned_timeseries(store, ego, i, t)
        s_j = binned_timeseries(store, ego, j, t)
        return recurrent_forward(self.model, stacked_series(s_i, s_j))

    def pairwise(self, store, ego, alters, t) -> np.ndarray:
        n = len(alters)
        series = [binned_timeseries(store, ego, a, t) for a in alters]
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        raw = np.full((n, n), 0.5)
        if pairs:
            probs = self.model.predict_series([stacked_series(series[a], series[b]) for a, b in pairs])
            for (a, b), p in zip(pairs, probs):
                raw[a, b] = p
        return raw


def comparator_of(model):
    if isinstance(model, ForestModel):
        return ForestComparator(model)
    if isinstance(model, RecurrentComparator):
        return LstmComparator(model)
    raise TypeError(f"no comparator for {type(model).__name__}")


def load_model(text: str) -> ForestModel | RecurrentComparator:
    fmt = json.loads(text).get("format")
    if fmt == "tiesignal-forest":
        return ForestModel.from_json(text)
    if fmt == "tiesignal-lstm":
        return RecurrentComparator.from_json(text)
    raise ValueError(f"unknown model format {fmt!r}")
