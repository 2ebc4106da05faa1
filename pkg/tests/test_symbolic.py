from __future__ import annotations

import pytest

from helpers import fact, span
from symtime.core import FactSet, QueryKind, TemporalQuery
from symtime.symbolic import answer_query, infer_query
from symtime.timepoints import NEG_INF, POS_INF, TimeInterval, TimePoint


@pytest.fixture
def career():
    return FactSet(
        [
            fact("position_held", "Theresa May", "Home Secretary", "2010-05", "2016-07"),
            fact("position_held", "Theresa May", "Prime Minister", "2016-07", "2019-07"),
            fact("position_held", "Theresa May", "Shadow Secretary", "1999", "2010-05"),
            fact("position_held", "Boris Johnson", "Mayor of London", "2008", "2016"),
        ]
    )


class TestAnswerQuery:
    def test_before(self, pelikan):
        query = TemporalQuery(kind="before", subject="Jaroslav Pelikan", reference_object="Concordia Seminary")
        result = answer_query(pelikan, query)
        assert result.answer == "Valparaiso University" and result.fact == pelikan[0]

    def test_after_without_subject_uses_reference(self, career):
        result = answer_query(career, TemporalQuery(kind="after", reference_object="home secretary"))
        assert result.answer == "Prime Minister"

    def test_missing_reference_is_a_note(self, pelikan):
        result = answer_query(pelikan, TemporalQuery(kind="before", reference_object="Yale"))
        assert result.answer == "" and result.fact is None and "Yale" in result.note

    def test_nothing_before(self, pelikan):
        result = answer_query(pelikan, TemporalQuery(kind="before", reference_object="Valparaiso University"))
        assert result.answer == "" and "before" in result.note

    def test_overlap_prefers_most_shared_days(self, career):
        # 2016 is shared by three offices; Home Secretary covers more of it than Prime Minister
        query = TemporalQuery(kind="overlap", subject="Theresa May", interval=span((2016,), (2016,)))
        assert answer_query(career, query).answer == "Home Secretary"
        query = TemporalQuery(kind="overlap", subject="Theresa May", interval=span((2017,), (2018,)))
        assert answer_query(career, query).answer == "Prime Minister"

    def test_overlap_subject_filter(self, career):
        query = TemporalQuery(kind="overlap", subject="Boris Johnson", interval=span((2010,), (2010,)))
        assert answer_query(career, query).answer == "Mayor of London"

    def test_first_and_last(self, career):
        assert answer_query(career, TemporalQuery(kind="first", subject="Theresa May")).answer == "Shadow Secretary"
        assert answer_query(career, TemporalQuery(kind="last", subject="Theresa May")).answer == "Prime Minister"

    def test_no_match(self, career):
        query = TemporalQuery(kind="overlap", subject="Theresa May", interval=span((1950,), (1960,)))
        assert answer_query(career, query).note == "no matching facts"

    def test_unbounded_overlap_ranks_first(self):
        facts = FactSet([fact("r", "s", "Short", "2000", "2001"), fact("r", "s", "Open", "1999", "present")])
        query = TemporalQuery(kind="overlap", interval=TimeInterval(TimePoint(2000), POS_INF))
        assert answer_query(facts, query).answer == "Open"


class TestInferQuery:
    def test_before_reference(self, pelikan):
        q = infer_query("Which employer did Jaroslav Pelikan work for before Concordia Seminary?", pelikan)
        assert (q.kind, q.subject, q.reference_object) == (QueryKind.BEFORE, "Jaroslav Pelikan", "Concordia Seminary")

    def test_after_reference(self, pelikan):
        q = infer_query("Where did jaroslav pelikan work after valparaiso university?", pelikan)
        assert q.kind is QueryKind.AFTER and q.reference_object == "Valparaiso University"

    def test_before_year_becomes_open_range(self, career):
        q = infer_query("Which position did Theresa May hold before 2005?", career)
        assert q.kind is QueryKind.OVERLAP
        assert (q.interval.start, q.interval.end) == (NEG_INF, TimePoint(2005))

    def test_range(self, career):
        q = infer_query("Which position did Theresa May hold from Jan 2017 to 2018?", career)
        assert q.interval == span((2017, 1), (2018,))

    def test_single_date(self, career):
        q = infer_query("Which position did Theresa May hold in March 5, 2011?", career)
        assert q.kind is QueryKind.OVERLAP and q.interval.start == TimePoint(2011, 3, 5)

    def test_first(self, career):
        q = infer_query("What was the first position held by Theresa May?", career)
        assert q.kind is QueryKind.FIRST and q.subject == "Theresa May"

    def test_latest(self, career):
        assert infer_query("What is the most recent position of Boris Johnson?", career).kind is QueryKind.LAST

    def test_nothing_usable(self, career):
        assert infer_query("Who is Theresa May?", career) is None

    def test_end_to_end(self, career):
        q = infer_query("Which position did Theresa May hold in 2017?", career)
        assert answer_query(career, q).answer == "Prime Minister"
