from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import span
from oracles import first_day, last_day, overlap_oracle, shared_days_oracle
from strategies import finite_points, intervals
from symtime.timepoints import (
    NEG_INF,
    POS_INF,
    Ordering,
    TimeInterval,
    TimePoint,
    compare_timepoints,
    format_timepoint,
    intervals_overlap,
    overlap_days,
    widen,
)


class TestTimePoint:
    def test_day_requires_month(self):
        with pytest.raises(ValueError):
            TimePoint(1949, None, 3)

    def test_infinite_points_have_no_fields(self):
        with pytest.raises(ValueError):
            TimePoint(1949, bound=NEG_INF.bound)

    @pytest.mark.parametrize("fields", [(1949, 13), (1949, 0), (2001, 2, 29), (1900, 2, 29)])
    def test_calendar_validation(self, fields):
        with pytest.raises(ValueError):
            TimePoint(*fields)

    def test_leap_day_accepted(self):
        assert TimePoint(2000, 2, 29).day == 29

    def test_granularity(self):
        assert TimePoint(1949).granularity == "year"
        assert TimePoint(1949, 1).granularity == "month"
        assert TimePoint(1949, 1, 2).granularity == "day"
        assert POS_INF.granularity == "infinite"

    @pytest.mark.parametrize(
        "point, side, text",
        [
            (TimePoint(1949, 1), None, "1949-01"),
            (TimePoint(7, 3, 4), None, "0007-03-04"),
            (TimePoint(-44, 3, 15), None, "-0044-03-15"),
            (NEG_INF, "start", "unknown"),
            (NEG_INF, None, "-inf"),
            (POS_INF, "end", "present"),
            (POS_INF, "start", "+inf"),
        ],
    )
    def test_format(self, point, side, text):
        assert format_timepoint(point, side) == text


class TestCompare:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            (TimePoint(1946), TimePoint(1949, 1), Ordering.LESS),
            (TimePoint(1949, 1), TimePoint(1949, 1), Ordering.EQUAL),
            (NEG_INF, TimePoint(1800), Ordering.LESS),
            (POS_INF, TimePoint(9999, 12, 31), Ordering.GREATER),
            (TimePoint(1949), TimePoint(1949, 1, 1), Ordering.EQUAL),
        ],
    )
    def test_examples(self, a, b, expected):
        assert compare_timepoints(a, b) is expected

    def test_end_side_widening(self):
        assert compare_timepoints(TimePoint(1949), TimePoint(1949, 6), "end", "end") is Ordering.GREATER

    @given(finite_points(), finite_points())
    def test_antisymmetric(self, a, b):
        assert compare_timepoints(a, b) == -compare_timepoints(b, a)

    @given(finite_points(), finite_points())
    def test_agrees_with_calendar_days(self, a, b):
        expected = (first_day(a) > first_day(b)) - (first_day(a) < first_day(b))
        assert compare_timepoints(a, b) == expected


class TestWiden:
    @pytest.mark.parametrize(
        "point, side, expected",
        [
            (TimePoint(1946), "start", TimePoint(1946, 1, 1)),
            (TimePoint(1946), "end", TimePoint(1946, 12, 31)),
            (TimePoint(2000, 2), "end", TimePoint(2000, 2, 29)),
            (TimePoint(1900, 2), "end", TimePoint(1900, 2, 28)),
            (TimePoint(1949, 4, 9), "end", TimePoint(1949, 4, 9)),
        ],
    )
    def test_examples(self, point, side, expected):
        assert widen(point, side) == expected

    def test_rejects_infinite(self):
        with pytest.raises(ValueError):
            widen(POS_INF, "end")


class TestOverlap:
    @pytest.mark.parametrize(
        "a, b, expected",
        [
            (span((1946,), (1949,)), span((1947,), (1948,)), True),
            (span((1946, 1), (1949, 1)), span((1949, 1), (1953, 1)), True),
            (span((1946,), (1949,)), span((1950,), (1951,)), False),
            (span((1949,), (1949,)), span((1949, 12, 31), (1950,)), True),
            (span((1949, 1), (1949, 1)), span((1949, 2), (1949, 3)), False),
        ],
    )
    def test_examples(self, a, b, expected):
        assert intervals_overlap(a, b) is expected

    def test_unbounded(self):
        assert intervals_overlap(TimeInterval(NEG_INF, TimePoint(1900)), span((1900, 12), (1901,)))
        assert intervals_overlap(TimeInterval.universal(), span((1,), (1,)))
        assert not intervals_overlap(TimeInterval(TimePoint(2000), POS_INF), span((1999,), (1999, 12, 31)))

    @given(intervals(unbounded=True), intervals(unbounded=True))
    def test_symmetric(self, a, b):
        assert intervals_overlap(a, b) == intervals_overlap(b, a)

    @given(intervals(unbounded=True), intervals(unbounded=True))
    def test_matches_day_enumeration(self, a, b):
        assert intervals_overlap(a, b) == overlap_oracle(a, b)

    @given(intervals(), intervals())
    def test_overlap_days_matches_enumeration(self, a, b):
        assert overlap_days(a, b) == shared_days_oracle(a, b)

    @given(intervals(unbounded=True), intervals(unbounded=True))
    def test_overlap_days_none_only_when_unbounded(self, a, b):
        days = overlap_days(a, b)
        if days is None:
            assert intervals_overlap(a, b)
            assert not all(p.is_finite for p in (a.start, a.end, b.start, b.end))

    def test_overlap_days_outside_datetime_range(self):
        # -1000 is divisible by 100 but not 400, so neither year is leap
        a = span((-1000,), (-999,))
        assert overlap_days(a, a) == 730
        assert overlap_days(span((-400, 2), (-400, 2)), span((-400,), (-400,))) == 29


class TestInterval:
    def test_inverted_allowed_but_flagged(self):
        interval = span((1953,), (1949,))
        assert interval.is_inverted
        assert not interval.swapped().is_inverted
        with pytest.raises(ValueError):
            TimeInterval.checked(TimePoint(1953), TimePoint(1949))

    def test_same_year_mixed_granularity_is_not_inverted(self):
        assert not span((2000, 5), (2000,)).is_inverted

    def test_coarsened(self):
        assert span((1946, 3, 2), (1949, 1)).coarsened() == span((1946,), (1949,))

    def test_contains(self):
        assert span((1946,), (1949,)).contains(span((1947, 3), (1949, 12, 31)))
        assert not span((1946,), (1949, 6)).contains(span((1947,), (1949,)))

    def test_str(self):
        assert str(TimeInterval(NEG_INF, POS_INF)) == "[unknown, present]"

    @given(intervals())
    def test_day_span_nonempty(self, interval):
        assert first_day(interval.start) <= last_day(interval.end)

    @given(st.integers(1900, 2100))
    def test_year_interval_has_full_year(self, year):
        assert overlap_days(span((year,), (year,)), span((year,), (year,))) in (365, 366)
