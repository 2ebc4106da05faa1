"""Calendar points with partial granularity and closed intervals over them.

A :class:`TimePoint` may carry only a year, a year and month, or a full date.
Comparisons that need total order widen coarse points to a concrete day:
the start side of an interval widens to the first day it denotes, the end
side to the last day.
"""

from __future__ import annotations

import calendar
import datetime
import enum
from dataclasses import dataclass
from typing import Literal, Optional

Side = Literal["start", "end"]


class Bound(str, enum.Enum):
    FINITE = "finite"
    NEG_INF = "negative-infinite"
    POS_INF = "positive-infinite"


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def days_in_month(year: int, month: int) -> int:
    # calendar rejects year 0 and negatives; the Gregorian cycle repeats every 400 years
    return calendar.monthrange(year % 400 + 2000, month)[1]


@dataclass(frozen=True)
class TimePoint:
    year: Optional[int] = None
    month: Optional[int] = None
    day: Optional[int] = None
    bound: Bound = Bound.FINITE

    def __post_init__(self) -> None:
        if self.bound is not Bound.FINITE:
            if (self.year, self.month, self.day) != (None, None, None):
                raise ValueError("infinite time points carry no calendar fields")
            return
        if self.year is None:
            raise ValueError("finite time point requires a year")
        if self.day is not None and self.month is None:
            raise ValueError("day given without month")
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")
        if self.day is not None:
            if not 1 <= self.day <= days_in_month(self.year, self.month):
                raise ValueError(f"day out of range: {self.year}-{self.month}-{self.day}")

    @classmethod
    def of(cls, year: int, month: Optional[int] = None, day: Optional[int] = None) -> "TimePoint":
        return cls(year, month, day)

    @property
    def is_finite(self) -> bool:
        return self.bound is Bound.FINITE

    @property
    def granularity(self) -> str:
        if not self.is_finite:
            return "infinite"
        if self.day is not None:
            return "day"
        if self.month is not None:
            return "month"
        return "year"

    def coarsen(self) -> "TimePoint":
        """Drop month and day, keeping the year."""
        if not self.is_finite:
            return self
        return TimePoint(self.year)

    def __str__(self) -> str:
        return format_timepoint(self)


NEG_INF = TimePoint(bound=Bound.NEG_INF)
POS_INF = TimePoint(bound=Bound.POS_INF)


def format_timepoint(p: TimePoint, side: Optional[Side] = None) -> str:
    """Render ``p`` in ``YYYY[-MM[-DD]]`` form.

    Infinite points render as ``unknown`` on the start side and ``present`` on
    the end side, which is what :func:`symtime.text.normalize_timestamp` reads
    back; off-side infinities fall back to ``-inf`` / ``+inf``.
    """
    if p.bound is Bound.NEG_INF:
        return "unknown" if side == "start" else "-inf"
    if p.bound is Bound.POS_INF:
        return "present" if side == "end" else "+inf"
    text = f"{p.year:05d}" if p.year < 0 else f"{p.year:04d}"
    if p.month is not None:
        text += f"-{p.month:02d}"
    if p.day is not None:
        text += f"-{p.day:02d}"
    return text


def widen(p: TimePoint, side: Side) -> TimePoint:
    if not p.is_finite:
        raise ValueError("cannot widen an infinite time point")
    if side == "start":
        return TimePoint(p.year, p.month or 1, p.day or 1)
    month = p.month or 12
    return TimePoint(p.year, month, p.day or days_in_month(p.year, month))


def sort_key(p: TimePoint, side: Side = "start") -> tuple:
    """Totally ordered key for ``p`` widened on ``side``."""
    if p.bound is Bound.NEG_INF:
        return (-1,)
    if p.bound is Bound.POS_INF:
        return (1,)
    w = widen(p, side)
    return (0, w.year, w.month, w.day)


def compare_timepoints(a: TimePoint, b: TimePoint, a_side: Side = "start", b_side: Side = "start") -> Ordering:
    """Order two points after widening each on its side.

    With the default sides, a missing month or day compares as the first of
    its period, so ``1949`` equals ``1949-01`` equals ``1949-01-01``.
    """
    ka, kb = sort_key(a, a_side), sort_key(b, b_side)
    if ka < kb:
        return Ordering.LESS
    if ka > kb:
        return Ordering.GREATER
    return Ordering.EQUAL


@dataclass(frozen=True)
class TimeInterval:
    """Closed interval ``[start, end]``.

    Inverted intervals are representable so that extracted evidence can be
    audited; :attr:`is_inverted` reports them and :meth:`checked` refuses them.
    """

    start: TimePoint
    end: TimePoint

    @classmethod
    def checked(cls, start: TimePoint, end: TimePoint) -> "TimeInterval":
        interval = cls(start, end)
        if interval.is_inverted:
            raise ValueError(f"inverted interval [{start}, {end}]")
        return interval

    @classmethod
    def universal(cls) -> "TimeInterval":
        return cls(NEG_INF, POS_INF)

    @property
    def is_inverted(self) -> bool:
        return sort_key(self.start, "start") > sort_key(self.end, "end")

    def swapped(self) -> "TimeInterval":
        return TimeInterval(self.end, self.start)

    def coarsened(self) -> "TimeInterval":
        return TimeInterval(self.start.coarsen(), self.end.coarsen())

    def contains(self, other: "TimeInterval") -> bool:
        return (
            sort_key(self.start, "start") <= sort_key(other.start, "start")
            and sort_key(other.end, "end") <= sort_key(self.end, "end")
        )

    def __str__(self) -> str:
        return f"[{format_timepoint(self.start, 'start')}, {format_timepoint(self.end, 'end')}]"


def intervals_overlap(a: TimeInterval, b: TimeInterval) -> bool:
    """True iff the closed intervals share at least one day."""
    return (
        sort_key(a.start, "start") <= sort_key(b.end, "end")
        and sort_key(b.start, "start") <= sort_key(a.end, "end")
    )


def overlap_days(a: TimeInterval, b: TimeInterval) -> Optional[int]:
    """Number of shared days, or None when either side is unbounded."""
    lo = max(sort_key(a.start, "start"), sort_key(b.start, "start"))
    hi = min(sort_key(a.end, "end"), sort_key(b.end, "end"))
    if lo > hi:
        return 0
    if lo[0] != 0 or hi[0] != 0:
        return None
    return _ordinal(hi) - _ordinal(lo) + 1


def _ordinal(key: tuple) -> int:
    # shift by whole 400-year cycles to stay inside datetime's supported range
    _, year, month, day = key
    cycles, year = divmod(year, 400)
    return datetime.date(year + 2000, month, day).toordinal() + cycles * 146097
