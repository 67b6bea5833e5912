from __future__ import annotations


import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiesignal import dynamics
from tiesignal.dynamics import (
    MotifLabel,
    Triad,
    classify_motif,
    classify_strengths,
    edge_volatility,
    extract_stable_triads,
    gaussian_kde,
    gender_asymmetry,
    motif_counts,
    relation_class_series,
    relation_labels,
    semester_intervals,
    transition_stat,
    trend_slope,
)
from tiesignal.pairwise import TieSignal
from tiesignal.survey import Gender, Relation, survey_waves
from tiesignal.synth import SynthConfig, generate_world

from conftest import answer, make_store, survey


def sig(ego, alter, values, times=None):
    s = TieSignal(ego, alter)
    for t, v in zip(times or range(len(values)), values):
        s.append(t, v)
    return s


def planted_signals(world, grid):
    """Latent closeness sampled on the grid, as if a perfect comparator had produced it."""
    out = {}
    for (e, a) in world.relationships:
        out[(e, a)] = sig(e, a, [world.closeness_at(e, a, t) for t in grid], list(grid))
    return out


# -- relation classes --------------------------------------------------------

def test_class_series_means():
    signals = {("e", "p"): sig("e", "p", [0.9, 0.9]), ("e", "f"): sig("e", "f", [0.2, 0.2]),
               ("e", "g"): sig("e", "g", [0.6, 0.6])}
    labels = {("e", "p"): Relation.PARENT, ("e", "f"): Relation.FRIEND, ("e", "g"): Relation.FRIEND}
    series = relation_class_series(signals, labels, [0, 1])
    assert series[Relation.PARENT].means == [0.9, 0.9]
    assert series[Relation.FRIEND].means == [pytest.approx(0.4)] * 2
    assert series[Relation.FRIEND].counts == [2, 2]
    assert Relation.SIBLING not in series


def test_relation_labels_majority_then_latest():
    s1 = survey("e", 1, [answer("a", relation=Relation.FRIEND)])
    s2 = survey("e", 2, [answer("a", relation=Relation.ACQUAINTANCE)])
    s3 = survey("e", 3, [answer("a", relation=Relation.FRIEND)])
    assert relation_labels([s1, s2, s3])[("e", "a")] is Relation.FRIEND
    assert relation_labels([s1, s2])[("e", "a")] is Relation.ACQUAINTANCE


def test_edge_volatility():
    signals = {("e", "p"): sig("e", "p", [0.9, 0.9, 0.9]), ("e", "f"): sig("e", "f", [0.1, 0.5, 0.9])}
    labels = {("e", "p"): Relation.PARENT, ("e", "f"): Relation.FRIEND}
    vol = edge_volatility(signals, labels)
    assert vol[Relation.PARENT] == 0.0
    assert vol[Relation.FRIEND] == pytest.approx(np.var([0.1, 0.5, 0.9]))


# -- transitions ---------------------------------------------------------------

def test_transition_constant_and_step():
    assert transition_stat(sig("e", "a", [0.4] * 6)).difference == 0.0
    st_ = transition_stat(sig("e", "a", [0.2, 0.2, 0.2, 0.7, 0.7, 0.7]))
    assert (st_.index, st_.difference) == (2, pytest.approx(0.5))
    assert transition_stat(sig("e", "a", [0.1, 0.9])) is None


def brute_transition(v):
    best, k_best = -1.0, None
    for k in range(len(v) - 1):
        jump = abs(v[k + 1] - v[k])
        if jump > best:
            best, k_best = jump, k
    before = sum(v[: k_best + 1]) / (k_best + 1)
    after = sum(v[k_best + 1:]) / (len(v) - k_best - 1)
    return k_best, after - before


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=30), st.integers(0, 1000))
def test_transition_matches_brute_force(noise, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, len(noise)))
    values = [0.1 * x + (0.6 if i >= k else 0.0) for i, x in enumerate(noise)]
    got = transition_stat(sig("e", "a", values))
    k_ref, d_ref = brute_transition(values)
    assert got.index == k_ref
    assert got.difference == pytest.approx(d_ref, abs=1e-12)


# -- KDE ------------------------------------------------------------------------

def test_kde_symmetric_and_normalised():
    kde = gaussian_kde([-1.0, 1.0])
    xs = np.linspace(-3, 3, 61)
    assert np.allclose(kde(xs), kde(-xs))
    assert not kde.degenerate


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=40))
def test_kde_integrates_to_one(samples):
    kde = gaussian_kde(samples)
    lo, hi = min(samples) - 10 * kde.bandwidth, max(samples) + 10 * kde.bandwidth
    xs = np.linspace(lo, hi, 200001)
    area = float(np.sum(kde(xs)) * (xs[1] - xs[0]))
    assert abs(area - 1.0) < 1e-3


def test_kde_silverman_and_degenerate():
    x = np.array([0.0, 1.0, 2.0, 3.0, 10.0])
    sd = np.std(x, ddof=1)
    iqr = np.percentile(x, 75) - np.percentile(x, 25)
    assert gaussian_kde(x).bandwidth == pytest.approx(0.9 * min(sd, iqr / 1.34) * 5 ** -0.2)
    flat = gaussian_kde([0.3, 0.3, 0.3])
    assert flat.degenerate and flat.bandwidth == 1e-3
    assert flat.modes()[0] == pytest.approx(0.3, abs=1e-4)
    with pytest.raises(ValueError):
        gaussian_kde([])


def test_kde_mode_of_bimodal():
    samples = [-0.5] * 10 + [0.5] * 30
    modes = gaussian_kde(samples).modes()
    assert modes[0] == pytest.approx(0.5, abs=0.02)
    assert modes[1] == pytest.approx(-0.5, abs=0.02)


# -- triads ---------------------------------------------------------------------

def _triangle_rows(counts_per_semester, sems):
    rows = []
    for (a, b), counts in counts_per_semester.items():
        for (lo, hi), n in zip(sems, counts):
            rows += [(lo + 1 + k, a, b) for k in range(n)]
    return rows


def test_stable_triangle_included_and_excluded():
    sems = [(0, 100), (100, 200)]
    pairs = {("a", "b"): [5, 5], ("a", "c"): [5, 5], ("b", "c"): [5, 5]}
    store = make_store(_triangle_rows(pairs, sems), participants="abc")
    assert [t.nodes for t in extract_stable_triads(store, sems, min_events=1)] == [("a", "b", "c")]
    pairs[("b", "c")] = [5, 0]
    store = make_store(_triangle_rows(pairs, sems), participants="abc")
    assert extract_stable_triads(store, sems, min_events=1) == []
    with pytest.raises(ValueError):
        extract_stable_triads(store, [], 1)


def test_triads_need_participants():
    sems = [(0, 100)]
    pairs = {("a", "b"): [4], ("a", "x"): [4], ("b", "x"): [4]}
    store = make_store(_triangle_rows(pairs, sems), participants="ab")
    assert extract_stable_triads(store, sems, 3) == []
    assert len(extract_stable_triads(store, sems, 3, participants="abx")) == 1


def test_planted_triangle_found():
    rng = np.random.default_rng(1)
    sems = semester_intervals([1000, 2000, 3000], 0)
    rows = []
    for (a, b) in (("p", "q"), ("p", "r"), ("q", "r")):
        for lo, hi in sems:
            rows += [(int(t), a, b) for t in rng.integers(lo, hi, size=4)]
    # distractors: a dense pair with a gap, and a star with no closing edge
    rows += [(int(t), "p", "s") for t in rng.integers(0, 1900, size=30)]
    rows += [(int(t), "q", "s") for t in rng.integers(0, 3000, size=30)]
    rows += [(int(t), "r", "u") for t in rng.integers(0, 3000, size=30)]
    store = make_store(rows, participants="pqrsu")
    assert [t.nodes for t in extract_stable_triads(store, sems, 3)] == [("p", "q", "r")]


def test_semester_intervals():
    assert semester_intervals([10, 20], 0) == [(0, 10), (10, 20)]


def test_gender_asymmetry_values():
    tri = [Triad(("a", "b", "c"))]
    genders = {"a": Gender.M, "b": Gender.M, "c": Gender.F}
    edges = {e: sig(*e, [0.5]) for e in tri[0].directed_edges()}
    assert gender_asymmetry(tri, edges, genders, [0]) == {"MMF": [0.0], "FFM": [None]}
    edges[("a", "b")] = sig("a", "b", [0.8])
    edges[("b", "a")] = sig("b", "a", [0.8])
    edges[("a", "c")] = sig("a", "c", [0.3])
    edges[("b", "c")] = sig("b", "c", [0.3])
    assert gender_asymmetry(tri, edges, genders, [0])["MMF"] == [pytest.approx(0.5)]
    assert gender_asymmetry(tri, edges, genders, [1])["MMF"] == [None]
    same = {"a": Gender.F, "b": Gender.F, "c": Gender.F}
    assert gender_asymmetry(tri, edges, same, [0]) == {"MMF": [None], "FFM": [None]}


@pytest.mark.parametrize("strengths,label", [
    ((0.5, 0.5, 0.5), MotifLabel.EQUALIST),
    ((0.2, 0.8, 0.8), MotifLabel.WEAK_LINK),
    ((0.2, 0.3, 0.9), MotifLabel.TWO_AGAINST_ONE),
    ((0.1, 0.5, 0.9), MotifLabel.TWO_AGAINST_ONE),
])
def test_classify_strengths(strengths, label):
    assert classify_strengths(strengths, 0.1) is label


def test_classify_motif_uses_mean_of_directions():
    nodes = ("a", "b", "c")
    vals = {("a", "b"): 0.9, ("b", "a"): 0.7, ("a", "c"): 0.8, ("c", "a"): 0.8, ("b", "c"): 0.85, ("c", "b"): 0.75}
    assert classify_motif(nodes, vals) is MotifLabel.EQUALIST
    del vals[("c", "b")]
    with pytest.raises(KeyError):
        classify_motif(nodes, vals)


def test_single_equalist_triad_counts():
    tri = Triad(("a", "b", "c"))
    signals = {e: sig(*e, [0.5, 0.5, 0.5]) for e in tri.directed_edges()}
    counts, n = motif_counts([tri], signals, [0, 1, 2])
    assert counts[MotifLabel.EQUALIST] == [1, 1, 1]
    assert n == [1, 1, 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_motif_counts_partition(seed, n_triads):
    rng = np.random.default_rng(seed)
    people = [f"p{k}" for k in range(6)]
    triads = [Triad(tuple(sorted(rng.choice(people, 3, replace=False)))) for _ in range(n_triads)]
    grid = [0, 1, 2, 3]
    signals = {}
    for a in people:
        for b in people:
            if a != b and rng.random() < 0.9:
                signals[(a, b)] = sig(a, b, list(rng.random(4)))
    counts, n = motif_counts(triads, signals, grid, epsilon=0.1)
    for k in range(len(grid)):
        assert sum(counts[m][k] for m in MotifLabel) == n[k] <= len(triads)


def test_trend_slope():
    assert trend_slope([0, 1, 2, 3], [1, 3, 5, 7]) == pytest.approx(2.0)
    assert trend_slope([0, 1, 2, 3, 4], [0, 1, 100, 3, 4]) == pytest.approx(1.0)


# -- planted properties of the generator seen through the analyses ---------------

@pytest.fixture(scope="module")
def default_world():
    return generate_world(SynthConfig(), seed=1)


def test_cementing_groups_grow_two_against_one(default_world):
    w = default_world
    store = w.store()
    cutoffs = survey_waves(w.surveys)
    triads = extract_stable_triads(store, semester_intervals(cutoffs, store.first_timestamp), 3)
    assert sorted(t.nodes for t in triads) == sorted(trio for _, trio in w.groups)
    grid = list(range(w.config.start_epoch + 7 * 86400, w.config.end_epoch, 21 * 86400))
    counts, n = motif_counts(triads, planted_signals(w, grid), grid, 0.1)
    days = [t / 86400 for t in grid]
    assert trend_slope(days, counts[MotifLabel.TWO_AGAINST_ONE]) > 0


def test_planted_parent_steadier_than_friend(default_world):
    w = default_world
    grid = list(range(w.config.start_epoch + 7 * 86400, w.config.end_epoch, 21 * 86400))
    labels = relation_labels(w.surveys)
    signals = {e: s for e, s in planted_signals(w, grid).items() if e in labels}
    vol = edge_volatility(signals, labels)
    assert vol[Relation.PARENT] < vol[Relation.FRIEND]
    series = relation_class_series(signals, labels, grid)
    assert np.var(series[Relation.PARENT].values()) < np.var(series[Relation.FRIEND].values())
    diffs, _ = dynamics.transition_differences(signals, labels)
    assert gaussian_kde(diffs[Relation.SIGNIFICANT_OTHER]).modes()[0] > 0.2
