"""Ego-network surveys and the pairwise tournament that turns them into rankings.

Every alter is compared with every other alter on each question. The alter
with the strictly greater answer earns a point; equal answers earn both a
point. Alters are ordered by total points, then by how many years the ego
has known them, then by id.

Ordinal answers arrive as canonical strings and are mapped through
:data:`CODE_TABLES`:

==========  ===================  =================  ==============  ===================
code        closeness            frequency          similarity
==========  ===================  =================  ==============  ===================
0           Distant              Rarely             Not similar
1           Less than close      Monthly            Somewhat similar
2           Close                Weekly             Similar
3           Especially close     Daily              Very similar
==========  ===================  =================  ==============  ===================

A missing answer (``null``) means that question awards no points to any pair
involving that alter.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import IO, Callable, Iterable, Sequence

from .cdr import PersonId

MAX_ALTERS = 20

CODE_TABLES: dict[str, dict[str, int]] = {
    "closeness": {"distant": 0, "less than close": 1, "close": 2, "especially close": 3},
    "frequency": {"rarely": 0, "monthly": 1, "weekly": 2, "daily": 3},
    "similarity": {"not similar": 0, "somewhat similar": 1, "similar": 2, "very similar": 3},
}
CANONICAL_ANSWERS: dict[str, list[str]] = {
    "closeness": ["Distant", "Less than close", "Close", "Especially close"],
    "frequency": ["Rarely", "Monthly", "Weekly", "Daily"],
    "similarity": ["Not similar", "Somewhat similar", "Similar", "Very similar"],
}


class Relation(enum.Enum):
    PARENT = "Parent"
    SIBLING = "Sibling"
    OTHER_KIN = "OtherKin"
    SIGNIFICANT_OTHER = "SignificantOther"
    FRIEND = "Friend"
    ACQUAINTANCE = "Acquaintance"
    OTHER = "Other"

    @classmethod
    def parse(cls, token: str) -> "Relation":
        key = token.replace(" ", "").replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown relation {token!r}")


class Gender(enum.Enum):
    M = "M"
    F = "F"
    UNSPECIFIED = "Unspecified"


class SurveyError(ValueError):
    pass


@dataclass(frozen=True)
class AlterAnswer:
    alter: PersonId
    closeness: int | None
    duration_years: float | None
    frequency: int | None
    similarity: int | None
    relation: Relation = Relation.OTHER
    gender: Gender = Gender.UNSPECIFIED

    def __post_init__(self):
        for name in ("closeness", "frequency", "similarity"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 3:
                raise SurveyError(f"{name} ordinal out of range: {v}")
        if self.duration_years is not None and self.duration_years < 0:
            raise SurveyError("duration_years must be non-negative")


@dataclass(frozen=True)
class SurveyResponse:
    ego: PersonId
    time: int
    answers: tuple[AlterAnswer, ...]
    wave: int | None = None
    ego_gender: Gender = Gender.UNSPECIFIED

    def __post_init__(self):
        alters = [a.alter for a in self.answers]
        if len(set(alters)) != len(alters):
            raise SurveyError(f"duplicate alters in survey of {self.ego}")
        if len(alters) > MAX_ALTERS:
            raise SurveyError(f"survey of {self.ego} lists {len(alters)} > {MAX_ALTERS} alters")
        if self.ego in alters:
            raise SurveyError(f"ego {self.ego} lists themself")

    @property
    def alters(self) -> list[PersonId]:
        return [a.alter for a in self.answers]


@dataclass(frozen=True)
class TieRanking:
    ego: PersonId
    time: int
    ordered_alters: tuple[PersonId, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(set(self.ordered_alters)) != len(self.ordered_alters):
            raise ValueError("duplicate alters in ranking")

    def __len__(self) -> int:
        return len(self.ordered_alters)

    def position(self, alter: PersonId) -> int:
        return self.ordered_alters.index(alter)


Question = Callable[[AlterAnswer], "float | Fraction | None"]

DEFAULT_QUESTIONS: dict[str, Question] = {
    "closeness": lambda a: a.closeness,
    "duration": lambda a: a.duration_years,
    "frequency": lambda a: a.frequency,
    "similarity": lambda a: a.similarity,
}


def tournament_scores(survey: SurveyResponse, questions: dict[str, Question] | None = None) -> dict[PersonId, int]:
    questions = DEFAULT_QUESTIONS if questions is None else questions
    if not survey.answers:
        raise SurveyError("survey has no answers")
    points = {a.alter: 0 for a in survey.answers}
    for ask in questions.values():
        values = [(a.alter, ask(a)) for a in survey.answers]
        for (x, vx), (y, vy) in combinations(values, 2):
            if vx is None or vy is None:
                continue
            if vx > vy:
                points[x] += 1
            elif vy > vx:
                points[y] += 1
            else:
                points[x] += 1
                points[y] += 1
    return points


def rank_alters(survey: SurveyResponse, questions: dict[str, Question] | None = None) -> TieRanking:
    points = tournament_scores(survey, questions)
    known = {a.alter: (a.duration_years if a.duration_years is not None else -1.0) for a in survey.answers}
    order = sorted(points, key=lambda p: (-points[p], -known[p], p))
    return TieRanking(survey.ego, survey.time, tuple(order))


# -- JSON survey files ----------------------------------------------------

def _ordinal(question: str, value) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        raise SurveyError(f"bad {question} answer {value!r}")
    if isinstance(value, int):
        return value
    try:
        return CODE_TABLES[question][str(value).strip().lower()]
    except KeyError:
        raise SurveyError(f"unknown {question} answer {value!r}") from None


def answer_from_dict(d: dict) -> AlterAnswer:
    duration = d.get("duration_years")
    return AlterAnswer(
        alter=str(d["alter"]),
        closeness=_ordinal("closeness", d.get("closeness")),
        duration_years=None if duration is None else float(duration),
        frequency=_ordinal("frequency", d.get("frequency")),
        similarity=_ordinal("similarity", d.get("similarity")),
        relation=Relation.parse(d.get("relation", "Other")),
        gender=Gender(d.get("gender", "Unspecified")),
    )


def answer_to_dict(a: AlterAnswer) -> dict:
    def name(question, v):
        return None if v is None else CANONICAL_ANSWERS[question][v]

    return {
        "alter": a.alter,
        "closeness": name("closeness", a.closeness),
        "duration_years": a.duration_years,
        "frequency": name("frequency", a.frequency),
        "similarity": name("similarity", a.similarity),
        "relation": a.relation.value,
        "gender": a.gender.value,
    }


def survey_from_dict(d: dict) -> SurveyResponse:
    return SurveyResponse(
        ego=str(d["ego"]),
        time=int(d["time"]),
        answers=tuple(answer_from_dict(a) for a in d["answers"]),
        wave=d.get("wave"),
        ego_gender=Gender(d.get("ego_gender", "Unspecified")),
    )


def survey_to_dict(s: SurveyResponse) -> dict:
    out = {"ego": s.ego, "time": s.time}
    if s.wave is not None:
        out["wave"] = s.wave
    out["ego_gender"] = s.ego_gender.value
    out["answers"] = [answer_to_dict(a) for a in s.answers]
    return out


def load_surveys(source: IO[str] | str) -> list[SurveyResponse]:
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return load_surveys(fh)
    data = json.load(source)
    if isinstance(data, dict):
        data = data["surveys"]
    return [survey_from_dict(d) for d in data]


def dump_surveys(surveys: Iterable[SurveyResponse], sink: IO[str]) -> None:
    json.dump([survey_to_dict(s) for s in surveys], sink, indent=1)
    sink.write("\n")


def survey_waves(surveys: Sequence[SurveyResponse]) -> list[int]:
    """Cutoff time of each wave: the latest survey time carrying that wave label.

    Surveys without a wave label are grouped by identical timestamp.
    """
    by_wave: dict[object, int] = {}
    for s in surveys:
        key = s.wave if s.wave is not None else ("t", s.time)
        by_wave[key] = max(by_wave.get(key, s.time), s.time)
    return sorted(by_wave.values())


def ground_truth(surveys: Iterable[SurveyResponse]) -> dict[tuple[PersonId, int], TieRanking]:
    return {(s.ego, s.time): rank_alters(s) for s in surveys if s.answers}
