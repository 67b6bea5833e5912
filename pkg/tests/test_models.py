from __future__ import annotations

import json

import numpy as np
import pytest

from tiesignal.models import (
    ForestConfig,
    ForestModel,
    RecurrentComparator,
    RecurrentConfig,
    TrainingDivergedError,
    comparator_of,
    forest_predict,
    generate_training_pairs,
    load_model,
    recurrent_forward,
    train_forest,
    train_recurrent,
)
from tiesignal.models.forest import DecisionTree, build_tree, fit_forest
from tiesignal.models.recurrent import fit_recurrent, forward, init_params, pad_batch, sigmoid
from tiesignal.models.training import egos_of, subsample_examples
from tiesignal.pairwise import feature_vector, rank_with
from tiesignal.survey import TieRanking

from conftest import DAY, make_store
from oracles import lstm_gradient_error

T = 400 * DAY


@pytest.fixture
def ranked_store():
    # the truth order a > b > c follows volume
    rows = []
    for alter, n in (("a", 30), ("b", 12), ("c", 4)):
        rows += [(DAY * (3 * k + 1), "e", alter, "text" if k % 2 else "call") for k in range(n)]
    rows += [(DAY * 5, "f", "a"), (DAY * 7, "f", "d")]
    return make_store(rows, participants=["e", "f"])


# -- training examples ---------------------------------------------------

def test_pairs_from_ranking(ranked_store):
    ex, skipped = generate_training_pairs([TieRanking("e", T, ("a", "b", "c"))], ranked_store)
    assert len(ex) == 6 and skipped == 0
    assert {(x.first, x.second, x.label) for x in ex} == {
        ("a", "b", 1), ("b", "a", 0), ("a", "c", 1), ("c", "a", 0), ("b", "c", 1), ("c", "b", 0)}
    assert egos_of(ex) == {"e"}


def test_pairs_skip_alters_without_history(ranked_store):
    ex, skipped = generate_training_pairs([TieRanking("e", T, ("a", "zz", "b"))], ranked_store)
    assert len(ex) == 2 and skipped == 2
    early, _ = generate_training_pairs([TieRanking("e", DAY, ("a", "b"))], ranked_store)
    assert early == []


def test_subsample_keeps_orientation_pairs(ranked_store):
    ex, _ = generate_training_pairs([TieRanking("e", T, ("a", "b", "c"))], ranked_store)
    sub = subsample_examples(ex, 2, seed=4)
    assert len(sub) == 4
    for k in range(0, 4, 2):
        assert (sub[k].first, sub[k].second) == (sub[k + 1].second, sub[k + 1].first)
    assert subsample_examples(ex, None, 0) is ex


# -- forest ----------------------------------------------------------------

def test_stump_separates_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [4.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    tree = build_tree(X, y, np.random.default_rng(0), max_depth=1, min_leaf=1, max_features=1)
    assert tree.n_nodes == 3
    assert np.array_equal(tree.predict_proba(X) > 0.5, y == 1)


def test_forest_deterministic_and_serializable():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 8))
    y = (X[:, 3] + 0.3 * X[:, 7] > 0).astype(int)
    cfg = ForestConfig(n_trees=15)
    a, b = fit_forest(X, y, cfg, seed=5), fit_forest(X, y, cfg, seed=5)
    assert a.to_json() == b.to_json()
    assert a.to_json() != fit_forest(X, y, cfg, seed=6).to_json()
    back = ForestModel.from_json(a.to_json())
    assert np.array_equal(back.predict_proba(X), a.predict_proba(X))
    assert isinstance(load_model(a.to_json()), ForestModel)


def test_forest_oob_beats_majority():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(50, 8))
    y = (X[:, 3] > 0.4).astype(int)
    model = fit_forest(X, y, ForestConfig(), seed=1)
    majority = max(y.mean(), 1 - y.mean())
    assert model.oob_accuracy > majority


def test_forest_vote_average():
    leaf = lambda v: DecisionTree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([v]))
    assert forest_predict(ForestModel([leaf(1.0)] * 4), np.zeros(8)) == 1.0
    assert forest_predict(ForestModel([leaf(1.0)] * 60 + [leaf(0.0)] * 40), np.zeros(8)) == pytest.approx(0.6)


def test_tree_dict_roundtrip():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] > X[:, 1]).astype(int)
    tree = build_tree(X, y, rng, max_depth=4, min_leaf=2, max_features=3)
    doc = json.loads(json.dumps(tree.to_dict()))
    assert np.array_equal(DecisionTree.from_dict(doc).predict_proba(X), tree.predict_proba(X))


def test_forest_comparator_on_store(ranked_store):
    ex, _ = generate_training_pairs([TieRanking("e", T, ("a", "b", "c"))], ranked_store)
    model = train_forest(ex, ranked_store, ForestConfig(n_trees=10, min_leaf=1), seed=0)
    comp = comparator_of(model)
    same = comp(ranked_store, "e", "a", "a", T)
    assert same == forest_predict(model, np.zeros(8))
    ranking, m, _ = rank_with(comp, ranked_store, "e", T)
    assert ranking.ordered_alters == ("a", "b", "c")
    single = comp(ranked_store, "e", "a", "c", T)
    assert single == pytest.approx(comp.pairwise(ranked_store, "e", ["a", "c"], T)[0, 1])
    f = feature_vector(ranked_store, "e", "a", T) - feature_vector(ranked_store, "e", "c", T)
    assert single == forest_predict(model, f)


def test_train_rejects_empty(ranked_store):
    with pytest.raises(ValueError):
        train_forest([], ranked_store)
    with pytest.raises(ValueError):
        train_recurrent([], ranked_store)


# -- recurrent -------------------------------------------------------------

def test_zero_weights_give_readout_bias():
    p = {k: np.zeros_like(v) for k, v in init_params(3, np.random.default_rng(0)).items()}
    p["c"][0] = 0.7
    assert recurrent_forward(p, np.zeros((5, 4))) == pytest.approx(float(sigmoid(0.7)))


def test_init_forget_bias():
    p = init_params(4, np.random.default_rng(0))
    assert p["b"].tolist() == [0.0] * 4 + [1.0] * 4 + [0.0] * 8
    assert np.abs(p["W"]).max() <= 0.1


def test_padding_does_not_change_output():
    p = init_params(5, np.random.default_rng(1), scale=0.5)
    s = np.random.default_rng(2).poisson(2, size=(3, 4)).astype(float)
    alone = forward(p, s[None])[0][0]
    X, mask = pad_batch([s, np.ones((7, 4))])
    assert forward(p, X, mask)[0][0] == pytest.approx(alone, abs=1e-15)


def test_recurrent_forward_validates():
    p = init_params(2, np.random.default_rng(0))
    for bad in (np.zeros((0, 4)), np.zeros((3, 3)), np.full((2, 4), np.nan)):
        with pytest.raises(ValueError):
            recurrent_forward(p, bad)


@pytest.mark.parametrize("seed", range(3))
def test_bptt_gradient(seed):
    assert lstm_gradient_error(seed) < 1e-4


def _toy_sequences(n=20, seed=0):
    rng = np.random.default_rng(seed)
    seqs, labels = [], []
    for k in range(n):
        hi, lo = rng.poisson(6, size=(4, 2)), rng.poisson(1, size=(4, 2))
        first_strong = k % 2 == 0
        seqs.append(np.hstack([hi, lo]) if first_strong else np.hstack([lo, hi]))
        labels.append(1.0 if first_strong else 0.0)
    return seqs, np.array(labels)


def test_training_loss_drops():
    seqs, y = _toy_sequences()
    model = fit_recurrent(seqs, y, RecurrentConfig(hidden=8, epochs=40, learning_rate=0.1, batch_size=4), seed=0)
    assert model.history[-1] <= 0.8 * model.history[0]


def test_recurrent_deterministic_and_serializable():
    seqs, y = _toy_sequences(8)
    cfg = RecurrentConfig(hidden=4, epochs=3, batch_size=4)
    a, b = fit_recurrent(seqs, y, cfg, seed=3), fit_recurrent(seqs, y, cfg, seed=3)
    assert a.to_json() == b.to_json()
    back = load_model(a.to_json())
    assert isinstance(back, RecurrentComparator)
    assert np.array_equal(back.predict_series(seqs), a.predict_series(seqs))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    seqs, y = _toy_sequences(8)
    seqs[0] = seqs[0].astype(float)
    seqs[0][1, 2] = np.inf
    with pytest.raises(TrainingDivergedError):
        fit_recurrent(seqs, y, RecurrentConfig(hidden=2, epochs=1), seed=0)


def test_lstm_comparator_batch_matches_single(ranked_store):
    ex, _ = generate_training_pairs([TieRanking("e", T, ("a", "b", "c"))], ranked_store)
    model = train_recurrent(ex, ranked_store, RecurrentConfig(hidden=4, epochs=2), seed=0)
    comp = comparator_of(model)
    m = comp.pairwise(ranked_store, "e", ["a", "b", "c"], T)
    for i, x in enumerate("abc"):
        for j, z in enumerate("abc"):
            if i != j:
                assert m[i, j] == pytest.approx(comp(ranked_store, "e", x, z, T), abs=1e-12)
