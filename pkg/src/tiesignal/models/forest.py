"""Bagged CART classifier (random forest) on pairwise difference features."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

FORMAT = "tiesignal-forest"
VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    max_features: int = 3  # ceil(sqrt(8))
    max_pairs: int | None = None


@dataclass
class DecisionTree:
    """Flat array tree. ``feature[k] == -1`` marks node k as a leaf.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            r, n, f = rows[inner], node[inner], feat[inner]
            go_left = X[r, f] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])
        return self.value[node]

    def to_dict(self, k: int = 0) -> dict:
        if self.feature[k] < 0:
            return {"leaf": float(self.value[k])}
        return {
            "feature": int(self.feature[k]),
            "threshold": float(self.threshold[k]),
            "left": self.to_dict(int(self.left[k])),
            "right": self.to_dict(int(self.right[k])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(node: dict) -> int:
            k = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in node:
                value[k] = float(node["leaf"])
                return k
            feature[k] = int(node["feature"])
            threshold[k] = float(node["threshold"])
            left[k] = visit(node["left"])
            right[k] = visit(node["right"])
            return k

        visit(d)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                   np.array(right, dtype=np.int64), np.array(value))


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int):
    """Lowest weighted-Gini split over ``features``; None when no split is admissible."""
    n = len(y)
    best = None
    best_cost = math.inf
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        pos_left = np.cumsum(y[order])[:-1]
        n_left = np.arange(1, n)
        ok = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        pos_total = pos_left[-1] + y[order[-1]]
        n_right = n - n_left
        pos_right = pos_total - pos_left
        # n * gini = 2 * pos * neg / n
        cost = pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right
        cost = np.where(ok, cost, np.inf)
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = cost[k]
            thr = (xs[k] + xs[k + 1]) / 2.0
            if thr >= xs[k + 1]:
                thr = xs[k]
            best = (int(f), float(thr))
    return best


def build_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, max_depth: int = 12,
               min_leaf: int = 2, max_features: int = 3) -> DecisionTree:
    n_features = X.shape[1]
    k_features = min(max_features, n_features)
    feature, threshold, left, right, value = [], [], [], [], []
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        k = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = k
        yi = y[idx]
        pos = int(yi.sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(pos / len(idx))
        if depth >= max_depth or pos == 0 or pos == len(idx) or len(idx) < 2 * min_leaf:
            continue
        cand = rng.choice(n_features, size=k_features, replace=False)
        split = _best_split(X[idx], yi, cand, min_leaf)
        if split is None:
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        feature[k] = f
        threshold[k] = thr
        # right pushed first so the left subtree gets the lower node ids
        stack.append((idx[~go_left], depth + 1, k, True))
        stack.append((idx[go_left], depth + 1, k, False))
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                        np.array(right, dtype=np.int64), np.array(value))


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    config: ForestConfig = field(default_factory=ForestConfig)
    seed: int = 0
    oob_accuracy: float | None = None

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def to_json(self) -> str:
        return json.dumps({
            "format": FORMAT,
            "version": VERSION,
            "seed": self.seed,
            "config": asdict(self.config),
            "oob_accuracy": self.oob_accuracy,
            "trees": [t.to_dict() for t in self.trees],
        })

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        d = json.loads(text)
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise ValueError("not a serialized forest model")
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], ForestConfig(**d["config"]), d["seed"],
                   d.get("oob_accuracy"))


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig(), seed: int = 0) -> ForestModel:
    """Fit ``config.n_trees`` trees on bootstrap resamples; records out-of-bag accuracy."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("empty training set")
    n = len(y)
    trees = []
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    for child in np.random.SeedSequence(seed).spawn(config.n_trees):
        rng = np.random.default_rng(child)
        sample = rng.integers(0, n, size=n)
        tree = build_tree(X[sample], y[sample], rng, config.max_depth, config.min_leaf, config.max_features)
        trees.append(tree)
        oob = np.ones(n, dtype=bool)
        oob[sample] = False
        if oob.any():
            oob_sum[oob] += tree.predict_proba(X[oob])
            oob_cnt[oob] += 1
    seen = oob_cnt > 0
    oob_acc = None
    if seen.any():
        pred = (oob_sum[seen] / oob_cnt[seen]) > 0.5
        oob_acc = float(np.mean(pred == (y[seen] == 1)))
    return ForestModel(trees, config, seed, oob_acc)


def forest_predict(model: ForestModel, diff: np.ndarray) -> float:
    return float(model.predict_proba(np.asarray(diff, dtype=float).reshape(1, -1))[0])
