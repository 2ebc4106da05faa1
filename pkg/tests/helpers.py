from __future__ import annotations

from symtime.core import TemporalFact
from symtime.text import normalize_timestamp
from symtime.timepoints import TimeInterval, TimePoint


def fact(relation: str, subject: str, obj: str, start: str, end: str) -> TemporalFact:
    return TemporalFact(
        relation, subject, obj, TimeInterval(normalize_timestamp(start, "start"), normalize_timestamp(end, "end"))
    )


def span(a: tuple, b: tuple) -> TimeInterval:
    """Interval from two ``(year, month, day)`` tuples; trailing fields may be omitted."""
    return TimeInterval(TimePoint(*a), TimePoint(*b))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool | None, detail: str = "") -> None:
    """Remember one acceptance verdict; conftest prints them all after the run.

    ``passed=None`` marks a criterion that was not exercised (for example a
    gated live check).
    """
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    line = f"criterion {number} [{status}] {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
