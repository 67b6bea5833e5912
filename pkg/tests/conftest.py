from __future__ import annotations

import pytest

from tiesignal.cdr import ChannelKind, CommEvent, EventStore
from tiesignal.survey import AlterAnswer, Gender, Relation, SurveyResponse

DAY = 86400


def ev(t, a, b, channel="call", magnitude=1) -> CommEvent:
    return CommEvent(int(t), a, b, ChannelKind(channel), magnitude)


def make_store(rows, participants=()) -> EventStore:
    return EventStore([ev(*r) for r in rows], participants)


def answer(alter, closeness=2, years=1.0, frequency=2, similarity=2,
           relation=Relation.FRIEND, gender=Gender.UNSPECIFIED) -> AlterAnswer:
    return AlterAnswer(alter, closeness, years, frequency, similarity, relation, gender)


def survey(ego, time, answers, wave=None, ego_gender=Gender.UNSPECIFIED) -> SurveyResponse:
    return SurveyResponse(ego, time, tuple(answers), wave, ego_gender)


@pytest.fixture
def tiny_store() -> EventStore:
    # ego "e" talks to a (often, recently), b (early only), c (texts)
    rows = [
        (1 * DAY, "e", "a"), (2 * DAY, "a", "e"), (9 * DAY, "e", "a"), (10 * DAY, "e", "a", "text"),
        (1 * DAY, "e", "b"), (3 * DAY, "b", "e"),
        (5 * DAY, "e", "c", "text"), (6 * DAY, "c", "e", "text"), (7 * DAY, "e", "c", "text"),
        (4 * DAY, "a", "b"), (8 * DAY, "a", "c"),
    ]
    return make_store(rows, participants=["e"])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
