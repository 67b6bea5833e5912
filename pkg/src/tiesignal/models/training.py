from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from ..cdr import EventStore, PersonId
from ..survey import TieRanking

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingExample:
    """One ordered comparison: ``label`` is 1 when ``first`` outranks ``second``."""

    ego: PersonId
    first: PersonId
    second: PersonId
    time: int
    label: int


def generate_training_pairs(rankings: Iterable[TieRanking], store: EventStore) -> tuple[list[TrainingExample], int]:
    """Both orientations of every ranked pair whose members have prior contact with the ego.

    Returns the examples and the number of ranked pairs skipped for lack of history.
    """
    examples: list[TrainingExample] = []
    skipped = 0
    for r in rankings:
        for a, b in combinations(r.ordered_alters, 2):
            if store.pair_count(r.ego, a, r.time) == 0 or store.pair_count(r.ego, b, r.time) == 0:
                skipped += 1
                continue
            examples.append(TrainingExample(r.ego, a, b, r.time, 1))
            examples.append(TrainingExample(r.ego, b, a, r.time, 0))
    if skipped:
        log.debug("skipped %d ranked pairs without communication history", skipped)
    return examples, skipped


def subsample_examples(examples: list[TrainingExample], max_pairs: int | None, seed: int) -> list[TrainingExample]:
    """Keep at most ``max_pairs`` comparisons, always with both orientations."""
    if max_pairs is None or len(examples) <= 2 * max_pairs:
        return examples
    # generate_training_pairs emits orientations adjacently
    n_pairs = len(examples) // 2
    keep = np.sort(np.random.default_rng(seed).choice(n_pairs, size=max_pairs, replace=False))
    out = []
    for k in keep:
        out.extend(examples[2 * k: 2 * k + 2])
    return out


def egos_of(examples: Iterable[TrainingExample]) -> set[PersonId]:
    return {e.ego for e in examples}
