"""Seeded synthetic world with planted ground truth.

Each ego->alter relationship follows a latent closeness trajectory on a
weekly grid: a per-alter base level plus a clipped random walk, optionally
switched on mid-study (onset) or ramped (cementing / drifting friendships
between participants). Calls and texts arrive as Poisson processes whose
weekly rate is the channel coefficient times closeness. At every survey wave
each ego lists the alters whose closeness clears a threshold (at most 20),
answering ordinal questions by quantising closeness at 0.25/0.5/0.75.

Participants are grouped in threes. Within a group every pair is befriended;
in "cementing" groups, from a random week on, one pair grows closer while
both ties to the third member drift down; in "equal" groups all three ties
stay level.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import IO

import numpy as np

from .cdr import ChannelKind, CommEvent, EventStore, PersonId, dump_events
from .survey import AlterAnswer, Gender, Relation, SurveyResponse, TieRanking, dump_surveys

DAY = 86400
QUANT_THRESHOLDS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class ArchetypeConfig:
    relation: Relation
    base: float
    base_spread: float = 0.0
    volatility: float = 0.0  # std of weekly walk increments
    call_rate: float = 0.0  # events/day at closeness 1
    text_rate: float = 0.0
    onset: tuple[float, float] | None = None  # day window in which the relationship switches on
    pre_onset: float = 0.0  # closeness before onset; 0 means no contact at all
    lifetime_days: tuple[float, float] | None = None  # contact ends this long after onset
    known_years: tuple[float, float] = (0.0, 0.0)  # acquaintance before the study began

    def __post_init__(self):
        if self.call_rate < 0 or self.text_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.volatility < 0:
            raise ValueError("volatility must be non-negative")


def default_archetypes(span_days: float, first_wave: float, wave_gap: float) -> dict[str, ArchetypeConfig]:
    return {
        "parent": ArchetypeConfig(Relation.PARENT, 0.85, 0.05, 0.004, call_rate=0.8, text_rate=0.8,
                                  known_years=(18.0, 18.0)),
        "sibling": ArchetypeConfig(Relation.SIBLING, 0.72, 0.08, 0.008, call_rate=0.3, text_rate=1.5,
                                   known_years=(8.0, 20.0)),
        "significant_other": ArchetypeConfig(
            Relation.SIGNIFICANT_OTHER, 0.9, 0.05, 0.008, call_rate=1.0, text_rate=8.0,
            onset=(first_wave + 0.25 * wave_gap, first_wave + 2.0 * wave_gap), pre_onset=0.04,
            known_years=(0.0, 0.0)),
        "friend": ArchetypeConfig(Relation.FRIEND, 0.55, 0.18, 0.035, call_rate=0.08, text_rate=2.5,
                                  known_years=(0.0, 6.0)),
        "acquaintance": ArchetypeConfig(Relation.ACQUAINTANCE, 0.3, 0.07, 0.025, call_rate=0.03, text_rate=3.5),
        "background": ArchetypeConfig(Relation.OTHER, 0.08, 0.04, 0.01, call_rate=0.03, text_rate=2.5,
                                      onset=(0.0, span_days - 20), lifetime_days=(14.0, 90.0)),
    }


@dataclass(frozen=True)
class SynthConfig:
    n_egos: int = 30
    n_waves: int = 4
    first_wave_day: float = 100.0
    wave_spacing_days: float = 120.0
    tail_days: float = 30.0
    start_epoch: int = 1314835200  # 2011-09-01
    step_days: int = 7
    list_cap: int = 20
    list_threshold: float = 0.2
    friends: tuple[int, int] = (6, 9)
    acquaintances: tuple[int, int] = (3, 5)
    shared_friends: int = 2
    p_significant_other: float = 0.5
    n_background: int = 40
    p_cementing: float = 0.6
    rate_spread: float = 0.35  # lognormal sigma of per-relationship rate multipliers
    walk_bound: float = 0.3
    answer_noise: float = 0.05
    archetypes: dict[str, ArchetypeConfig] | None = None

    @property
    def span_days(self) -> float:
        return self.first_wave_day + (self.n_waves - 1) * self.wave_spacing_days + self.tail_days

    @property
    def wave_times(self) -> list[int]:
        return [int(self.start_epoch + (self.first_wave_day + k * self.wave_spacing_days) * DAY)
                for k in range(self.n_waves)]

    @property
    def end_epoch(self) -> int:
        return int(self.start_epoch + self.span_days * DAY)

    def archetype(self, name: str) -> ArchetypeConfig:
        table = self.archetypes or default_archetypes(self.span_days, self.first_wave_day, self.wave_spacing_days)
        return table[name]

    def validate(self) -> None:
        if self.n_egos < 3:
            raise ValueError("need at least 3 egos")
        if self.n_waves < 1:
            raise ValueError("need at least one wave")
        if not 0 < self.list_cap <= 20:
            raise ValueError("list cap must be in 1..20")


@dataclass
class Relationship:
    ego: PersonId
    alter: PersonId
    archetype: str
    relation: Relation
    closeness: np.ndarray  # per step
    known_years_at_start: float
    onset_day: float = 0.0


@dataclass
class SynthWorld:
    config: SynthConfig
    seed: int
    participants: list[PersonId]
    genders: dict[PersonId, Gender]
    relationships: dict[tuple[PersonId, PersonId], Relationship]
    events: list[CommEvent]
    surveys: list[SurveyResponse]
    planted: dict[tuple[PersonId, int], TieRanking]
    groups: list[tuple[str, tuple[PersonId, ...]]] = field(default_factory=list)

    @property
    def waves(self) -> list[int]:
        return self.config.wave_times

    def store(self) -> EventStore:
        return EventStore(self.events, self.participants)

    def closeness_at(self, ego: PersonId, alter: PersonId, t: float) -> float:
        rel = self.relationships[(ego, alter)]
        k = int((t - self.config.start_epoch) // (self.config.step_days * DAY))
        return float(rel.closeness[min(max(k, 0), len(rel.closeness) - 1)])

    def write_cdr(self, sink: IO[str]) -> None:
        dump_events(self.events, sink)

    def write_surveys(self, sink: IO[str]) -> None:
        dump_surveys(self.surveys, sink)

    def truth_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg.pop("archetypes")
        return {
            "seed": self.seed,
            "config": cfg,
            "waves": self.waves,
            "participants": self.participants,
            "genders": {p: g.value for p, g in sorted(self.genders.items())},
            "groups": [{"pattern": pat, "members": list(m)} for pat, m in self.groups],
            "planted": [{"ego": e, "time": t, "ranking": list(r.ordered_alters)}
                        for (e, t), r in sorted(self.planted.items())],
            "relationships": [
                {"ego": r.ego, "alter": r.alter, "archetype": r.archetype, "relation": r.relation.value,
                 "step_days": self.config.step_days, "closeness": [round(float(c), 6) for c in r.closeness]}
                for _, r in sorted(self.relationships.items())
            ],
        }

    def write_truth(self, sink: IO[str]) -> None:
        json.dump(self.truth_dict(), sink)
        sink.write("\n")


def quantize(c: float) -> int:
    return int(sum(c >= q for q in QUANT_THRESHOLDS))


def _trajectory(arch: ArchetypeConfig, n_steps: int, step_days: int, rng: np.random.Generator, bound: float
                ) -> tuple[np.ndarray, float]:
    base = float(np.clip(arch.base + rng.normal(0.0, arch.base_spread) if arch.base_spread else arch.base, 0.0, 1.0))
    walk = np.zeros(n_steps)
    if arch.volatility > 0:
        steps = rng.normal(0.0, arch.volatility, size=n_steps)
        w = 0.0
        for k in range(n_steps):
            w = min(max(w + steps[k], -bound), bound)
            walk[k] = w
    c = np.clip(base + walk, 0.0, 1.0)
    onset_day = 0.0
    if arch.onset is not None:
        onset_day = float(rng.uniform(*arch.onset))
        day = np.arange(n_steps) * step_days
        c = np.where(day >= onset_day, c, arch.pre_onset)
        if arch.lifetime_days is not None:
            end = onset_day + float(rng.uniform(*arch.lifetime_days))
            c = np.where(day < end, c, 0.0)
    return c, onset_day


# every group starts as a close, level trio
GROUP_START = 0.85
CEMENT_STEPS = 12  # weeks a split takes to complete


def _ramp(start: float, end: float, n_steps: int, noise: float, rng: np.random.Generator,
          begin: int = 0, length: int | None = None) -> np.ndarray:
    """Level ``start`` until step ``begin``, linear to ``end`` over ``length`` steps, then level."""
    length = n_steps - begin if length is None else max(1, length)
    frac = np.clip((np.arange(n_steps) - begin) / length, 0.0, 1.0)
    c = start + (end - start) * frac + rng.normal(0.0, noise, size=n_steps)
    return np.clip(c, 0.0, 1.0)


def _emit(a: PersonId, b: PersonId, closeness: np.ndarray, arch: ArchetypeConfig, mult: tuple[float, float],
          cfg: SynthConfig, rng: np.random.Generator, out: list[CommEvent]) -> None:
    step = cfg.step_days * DAY
    n_steps = len(closeness)
    end = cfg.end_epoch
    for chan, coef, m in ((ChannelKind.CALL, arch.call_rate, mult[0]), (ChannelKind.TEXT, arch.text_rate, mult[1])):
        lam = coef * m * closeness * cfg.step_days
        counts = rng.poisson(lam)
        total = int(counts.sum())
        if total == 0:
            continue
        starts = np.repeat(cfg.start_epoch + np.arange(n_steps) * step, counts)
        times = starts + rng.integers(0, step, size=total)
        senders = rng.random(total) < 0.5
        if chan is ChannelKind.CALL:
            mags = 1 + rng.geometric(1 / 180.0, size=total)
        else:
            mags = 1 + rng.poisson(40, size=total)
        for ts, s_first, mag in zip(times, senders, mags):
            if ts >= end:
                continue
            s, r = (a, b) if s_first else (b, a)
            out.append(CommEvent(int(ts), s, r, chan, int(mag)))


def generate_world(config: SynthConfig = SynthConfig(), seed: int = 0) -> SynthWorld:
    config.validate()
    rng = np.random.default_rng(seed)
    cfg = config
    n_steps = int(math.ceil(cfg.span_days / cfg.step_days))
    egos = [f"P{k:03d}" for k in range(cfg.n_egos)]
    genders = {e: (Gender.M if rng.random() < 0.5 else Gender.F) for e in egos}
    rels: dict[tuple[PersonId, PersonId], Relationship] = {}
    events: list[CommEvent] = []
    rate_mult: dict[tuple[PersonId, PersonId], tuple[float, float]] = {}

    def mult() -> tuple[float, float]:
        return tuple(float(x) for x in np.exp(rng.normal(0.0, cfg.rate_spread, size=2)))

    used_ids: set[str] = set()

    def opaque_id() -> str:
        # CDR ids are opaque tokens; readable names would bias id-order tie-breaks
        while True:
            token = "N" + "".join("0123456789abcdef"[d] for d in rng.integers(0, 16, size=8))
            if token not in used_ids:
                used_ids.add(token)
                return token

    def add(ego, alter, name, closeness, known, onset=0.0, relation=None):
        arch = cfg.archetype(name)
        rels[(ego, alter)] = Relationship(ego, alter, name, relation or arch.relation, closeness, known, onset)

    # participant groups of three
    groups: list[tuple[str, tuple[PersonId, ...]]] = []
    order = list(rng.permutation(cfg.n_egos))
    members = [egos[k] for k in order]
    n_groups = cfg.n_egos // 3
    friend = cfg.archetype("friend")
    for g in range(n_groups):
        trio = tuple(sorted(members[3 * g: 3 * g + 3]))
        pattern = "cementing" if rng.random() < cfg.p_cementing else "equal"
        groups.append((pattern, trio))
        a, b, c = trio
        if pattern == "cementing":
            close_pair = {(a, b), (a, c), (b, c)}
            strong = sorted(close_pair)[int(rng.integers(0, 3))]
            # groups split at different times, so splits accumulate over the study
            begin = int(rng.integers(0, int(0.75 * n_steps)))
            for pair in sorted(close_pair):
                target = 0.95 if pair == strong else 0.3
                traj = _ramp(GROUP_START, target, n_steps, 0.02, rng, begin, CEMENT_STEPS)
                _pair_rel(pair, traj, friend, add, rate_mult, mult)
        else:
            for pair in ((a, b), (a, c), (b, c)):
                _pair_rel(pair, _ramp(GROUP_START, GROUP_START, n_steps, 0.02, rng), friend, add, rate_mult, mult)
        # non-participant friends shared by the whole group
        for s in range(cfg.shared_friends):
            shared = opaque_id()
            genders[shared] = Gender.M if rng.random() < 0.5 else Gender.F
            for e in trio:
                traj, _ = _trajectory(friend, n_steps, cfg.step_days, rng, cfg.walk_bound)
                add(e, shared, "friend", traj, float(rng.uniform(*friend.known_years)))
                rate_mult[(e, shared)] = mult()
    # leftover egos (n_egos not divisible by 3) get no participant ties

    for e in egos:
        own = ["parent", "sibling"]
        if rng.random() < cfg.p_significant_other:
            own.append("significant_other")
        own += ["friend"] * int(rng.integers(cfg.friends[0], cfg.friends[1] + 1))
        own += ["acquaintance"] * int(rng.integers(cfg.acquaintances[0], cfg.acquaintances[1] + 1))
        own += ["background"] * cfg.n_background
        for name in own:
            alter = opaque_id()
            arch = cfg.archetype(name)
            genders[alter] = Gender.M if rng.random() < 0.5 else Gender.F
            traj, onset = _trajectory(arch, n_steps, cfg.step_days, rng, cfg.walk_bound)
            add(e, alter, name, traj, float(rng.uniform(*arch.known_years)), onset)
            rate_mult[(e, alter)] = mult()

    # events: one stream per unordered pair
    done = set()
    for (ego, alter), rel in sorted(rels.items()):
        key = tuple(sorted((ego, alter)))
        if key in done:
            continue
        done.add(key)
        _emit(ego, alter, rel.closeness, cfg.archetype(rel.archetype), rate_mult[(ego, alter)], cfg, rng, events)
    events.sort(key=lambda ev: ev.timestamp)

    surveys, planted = [], {}
    by_ego: dict[PersonId, list[Relationship]] = {}
    for (ego, _), rel in sorted(rels.items()):
        by_ego.setdefault(ego, []).append(rel)
    for w, t in enumerate(cfg.wave_times):
        step = min(int((t - cfg.start_epoch) // (cfg.step_days * DAY)), n_steps - 1)
        elapsed_years = (t - cfg.start_epoch) / (365.25 * DAY)
        for e in egos:
            cands = [(float(r.closeness[step]), r) for r in by_ego.get(e, []) if r.closeness[step] >= cfg.list_threshold]
            cands.sort(key=lambda x: (-x[0], x[1].alter))
            listed = cands[: cfg.list_cap]
            answers = []
            for c, r in listed:
                since_onset = elapsed_years - r.onset_day / 365.25 if r.onset_day else elapsed_years
                answers.append(AlterAnswer(
                    alter=r.alter,
                    closeness=quantize(c),
                    duration_years=round(r.known_years_at_start + max(since_onset, 0.0), 2),
                    frequency=quantize(c + rng.normal(0.0, cfg.answer_noise)),
                    similarity=quantize(c + rng.normal(0.0, 2 * cfg.answer_noise)),
                    relation=r.relation,
                    gender=genders[r.alter],
                ))
            # listing order carries no information
            perm = rng.permutation(len(answers))
            answers = [answers[k] for k in perm]
            surveys.append(SurveyResponse(e, t, tuple(answers), wave=w, ego_gender=genders[e]))
            planted[(e, t)] = TieRanking(e, t, tuple(r.alter for _, r in listed))
    return SynthWorld(cfg, seed, egos, genders, rels, events, surveys, planted, groups)


def _pair_rel(pair, traj, arch, add, rate_mult, mult) -> None:
    a, b = pair
    m = mult()
    for x, y in ((a, b), (b, a)):
        add(x, y, "friend", traj.copy(), 0.0)
        rate_mult[(x, y)] = m


def planted_ranking(world: SynthWorld, ego: PersonId, wave: int) -> TieRanking:
    return world.planted[(ego, world.waves[wave])]


def small_config(**overrides) -> SynthConfig:
    """A reduced world for quick runs and tests."""
    base = SynthConfig(n_egos=9, n_background=10, friends=(3, 5), acquaintances=(1, 2))
    return replace(base, **overrides)
