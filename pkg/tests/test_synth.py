from __future__ import annotations

import io
import math
from dataclasses import replace

import numpy as np
import pytest

from tiesignal.evaluation import rbo
from tiesignal.survey import Relation, load_surveys, rank_alters
from tiesignal.synth import (
    DAY,
    ArchetypeConfig,
    SynthConfig,
    generate_world,
    planted_ranking,
    quantize,
    small_config,
)


def _flat_archetypes(rate: float, zero_rate_name: str = "acquaintance"):
    flat = ArchetypeConfig(Relation.FRIEND, 0.5, call_rate=rate, text_rate=rate)
    table = {name: flat for name in ("parent", "sibling", "significant_other", "friend", "background")}
    table[zero_rate_name] = ArchetypeConfig(Relation.ACQUAINTANCE, 0.5)
    return table


@pytest.fixture(scope="module")
def small_world():
    return generate_world(small_config(), seed=3)


def test_same_seed_same_bytes():
    cfg = small_config()
    outs = []
    for _ in range(2):
        w = generate_world(cfg, seed=8)
        buf = io.StringIO()
        w.write_cdr(buf)
        w.write_surveys(buf)
        w.write_truth(buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    other = io.StringIO()
    generate_world(cfg, seed=9).write_cdr(other)
    assert other.getvalue() != outs[0]


def test_quantize_thresholds():
    assert [quantize(c) for c in (0.0, 0.249, 0.25, 0.5, 0.74, 0.75, 1.0)] == [0, 0, 1, 2, 2, 3, 3]


def test_constant_rates_within_poisson_bounds():
    rate = 0.6
    cfg = small_config(archetypes=_flat_archetypes(rate), rate_spread=0.0, walk_bound=0.0)
    w = generate_world(cfg, seed=1)
    store = w.store()
    n_steps = math.ceil(cfg.span_days / cfg.step_days)
    # both channels at closeness 0.5, clipped to the span end
    expected = 2 * rate * 0.5 * cfg.step_days * n_steps * (cfg.span_days / (n_steps * cfg.step_days))
    sd = math.sqrt(expected)
    checked = 0
    parts = set(w.participants)
    for (ego, alter), rel in w.relationships.items():
        # participant pairs follow group ramps; acquaintances are silent here
        if alter in parts or rel.archetype == "acquaintance":
            continue
        n = store.pair_count(ego, alter, math.inf)
        assert abs(n - expected) <= 3 * sd + 1
        checked += 1
    assert checked > 20


def test_zero_rate_archetype_is_silent():
    cfg = small_config(archetypes=_flat_archetypes(0.4, "acquaintance"))
    w = generate_world(cfg, seed=2)
    store = w.store()
    quiet = [k for k, r in w.relationships.items() if r.archetype == "acquaintance"]
    assert quiet
    assert all(store.pair_count(e, a, math.inf) == 0 for e, a in quiet)


def test_total_event_count_poisson():
    cfg = small_config(rate_spread=0.0)
    w = generate_world(cfg, seed=6)
    n_steps = math.ceil(cfg.span_days / cfg.step_days)
    # share of each weekly step that falls before the end of the span
    inside = np.clip((cfg.span_days - np.arange(n_steps) * cfg.step_days) / cfg.step_days, 0.0, 1.0)
    lam = 0.0
    seen = set()
    for (e, a), rel in w.relationships.items():
        key = tuple(sorted((e, a)))
        if key in seen:
            continue
        seen.add(key)
        arch = cfg.archetype(rel.archetype)
        lam += (arch.call_rate + arch.text_rate) * cfg.step_days * float(np.sum(rel.closeness * inside))
    assert abs(len(w.events) - lam) <= 3 * math.sqrt(lam)


def test_events_inside_span_and_sorted(small_world):
    ts = np.array([e.timestamp for e in small_world.events])
    cfg = small_world.config
    assert ts.min() >= cfg.start_epoch and ts.max() < cfg.end_epoch
    assert np.all(np.diff(ts) >= 0)


def test_surveys_follow_planted_closeness(small_world):
    cfg = small_world.config
    assert len(small_world.surveys) == cfg.n_waves * cfg.n_egos
    for s in small_world.surveys:
        assert len(s.answers) <= cfg.list_cap
        for a in s.answers:
            c = small_world.closeness_at(s.ego, a.alter, s.time - 1)
            assert c >= cfg.list_threshold
            assert a.closeness == quantize(c)
        planted = planted_ranking(small_world, s.ego, s.wave)
        assert set(planted.ordered_alters) == set(s.alters)


def test_planted_ranking_order():
    w = generate_world(small_config(), seed=5)
    for (e, t), r in w.planted.items():
        cs = [w.closeness_at(e, a, t - 1) for a in r.ordered_alters]
        assert cs == sorted(cs, reverse=True)


def test_tournament_truth_tracks_planted(small_world):
    # quantised answers blur the planted order but keep far more of it than chance
    rng = np.random.default_rng(0)
    got, chance = [], []
    for s in small_world.surveys:
        if len(s.answers) < 2:
            continue
        planted = planted_ranking(small_world, s.ego, s.wave).ordered_alters
        got.append(rbo(rank_alters(s), planted))
        chance.append(rbo([planted[k] for k in rng.permutation(len(planted))], planted))
    assert np.mean(got) > np.mean(chance) + 0.1


def test_significant_other_onset_mid_study():
    cfg = SynthConfig(n_egos=9, n_background=0, p_significant_other=1.0)
    w = generate_world(cfg, seed=4)
    sos = [r for r in w.relationships.values() if r.archetype == "significant_other"]
    assert len(sos) == 9
    for r in sos:
        assert cfg.first_wave_day < r.onset_day < cfg.first_wave_day + 2 * cfg.wave_spacing_days
        k = int(r.onset_day // cfg.step_days)
        assert r.closeness[:k].max() < cfg.list_threshold
        assert r.closeness[k + 1:].min() > 0.5


def test_groups_and_opaque_ids(small_world):
    assert len(small_world.groups) == 3
    members = [p for _, trio in small_world.groups for p in trio]
    assert sorted(members) == sorted(small_world.participants)
    others = {a for (_, a) in small_world.relationships} - set(small_world.participants)
    assert all(len(a) == 9 and a[0] == "N" for a in others)


def test_surveys_roundtrip_json(small_world):
    buf = io.StringIO()
    small_world.write_surveys(buf)
    buf.seek(0)
    assert load_surveys(buf) == small_world.surveys


def test_config_validation():
    with pytest.raises(ValueError):
        generate_world(replace(small_config(), n_egos=2))
    with pytest.raises(ValueError):
        ArchetypeConfig(Relation.FRIEND, 0.5, call_rate=-1.0)


def test_wave_times():
    cfg = SynthConfig()
    assert cfg.wave_times[0] == cfg.start_epoch + 100 * DAY
    assert len(cfg.wave_times) == 4
