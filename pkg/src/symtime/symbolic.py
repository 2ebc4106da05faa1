"""Answering questions from facts alone, with no model in the loop."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    FactSet,
    QueryKind,
    TemporalFact,
    TemporalQuery,
    canonical_entity,
    filter_relevant,
    filter_subject,
    find_adjacent,
    find_reference,
)
from .errors import ReferenceNotFoundError, TimestampParseError
from .text import normalize_timestamp
from .timepoints import NEG_INF, POS_INF, TimeInterval, overlap_days, sort_key


@dataclass(frozen=True)
class SymbolicAnswer:
    answer: str
    fact: Optional[TemporalFact] = None
    note: str = ""


def answer_query(facts: Sequence[TemporalFact], query: TemporalQuery) -> SymbolicAnswer:
    """Resolve ``query`` against ``facts`` and return the answering object.

    Overlap queries pick, among facts overlapping the query period, the one
    sharing the most days with it (then the earliest start). Before/after use
    :func:`find_adjacent`; first/last pick the earliest/latest start.
    """
    if query.kind in (QueryKind.BEFORE, QueryKind.AFTER):
        try:
            ref = find_reference(facts, query.reference_object, query.relation, query.subject)
        except ReferenceNotFoundError as exc:
            return SymbolicAnswer("", note=str(exc))
        hit = find_adjacent(
            facts,
            query.relation or ref.relation,
            query.subject or ref.subject,
            ref.object,
            query.kind.value,
        )
        if hit is None:
            return SymbolicAnswer("", note=f"nothing {query.kind.value} {ref.object!r}")
        return SymbolicAnswer(hit.object, hit)

    pool = FactSet(facts)
    if query.subject:
        pool = filter_subject(pool, query.subject)
    if query.relation:
        pool = FactSet(f for f in pool if f.relation == query.relation)
    if query.interval is not None:
        pool = filter_relevant(pool, query.interval)
    if not pool:
        return SymbolicAnswer("", note="no matching facts")

    order = {id(f): i for i, f in enumerate(pool)}
    if query.kind is QueryKind.OVERLAP:

        def rank(f: TemporalFact):
            days = overlap_days(f.interval, query.interval)
            # unbounded overlaps rank above any finite day count
            return (-(float("inf") if days is None else days), sort_key(f.start), order[id(f)])

        best = min(pool, key=rank)
    elif query.kind is QueryKind.FIRST:
        best = min(pool, key=lambda f: (sort_key(f.start), sort_key(f.end, "end"), order[id(f)]))
    else:
        best = min(pool, key=lambda f: (_neg(sort_key(f.start)), _neg(sort_key(f.end, "end")), order[id(f)]))
    return SymbolicAnswer(best.object, best)


def _neg(key: tuple) -> tuple:
    return tuple(-x for x in key)


_YEARISH = r"(?:\d{1,2}\s+)?(?:[A-Z][a-z]+\.?\s+)?(?:\d{1,2},?\s+)?\d{4}(?:-\d{1,2}(?:-\d{1,2})?)?"
_TIMESTAMP = re.compile(_YEARISH)


def _timestamps(question: str) -> list[tuple[int, str]]:
    found = []
    for m in _TIMESTAMP.finditer(question):
        text = m.group(0)
        # retry without a leading capitalised word that is not a month name
        for candidate in (text, re.sub(r"^\S+\s+", "", text)):
            try:
                normalize_timestamp(candidate, "start")
            except TimestampParseError:
                continue
            found.append((m.end() - len(candidate), candidate))
            break
    return found


def _mentions(question: str, names: Sequence[str]) -> list[tuple[int, str]]:
    text = canonical_entity(question)
    hits = []
    for name in sorted(set(names), key=lambda n: -len(canonical_entity(n))):
        m = re.search(r"(?<!\w)" + re.escape(canonical_entity(name)) + r"(?!\w)", text)
        if m:
            hits.append((m.start(), name))
    return sorted(hits)


def infer_query(question: str, facts: Sequence[TemporalFact]) -> Optional[TemporalQuery]:
    """Best-effort mapping of a templated question onto a query.

    Subjects and reference objects are recognised only when the question
    mentions them verbatim (up to case and spacing). Returns None when no
    usable constraint is found.
    """
    subjects = _mentions(question, [f.subject for f in facts])
    subject = subjects[0][1] if subjects else None
    lowered = question.lower()

    for kind in ("before", "after"):
        m = re.search(rf"\b{kind}\b", lowered)
        if not m:
            continue
        objects = [(pos, name) for pos, name in _mentions(question, [f.object for f in facts]) if pos > m.start()]
        if objects:
            return TemporalQuery(kind=kind, subject=subject, reference_object=objects[0][1])
        stamps = [s for pos, s in _timestamps(question) if pos > m.start()]
        if stamps:
            point = normalize_timestamp(stamps[0], "start")
            interval = TimeInterval(NEG_INF, point) if kind == "before" else TimeInterval(point, POS_INF)
            return TemporalQuery(kind="overlap", subject=subject, interval=interval)

    stamps = [s for _, s in _timestamps(question)]
    interval = None
    if stamps:
        interval = TimeInterval(normalize_timestamp(stamps[0], "start"), normalize_timestamp(stamps[-1], "end"))
    if re.search(r"\b(first|earliest)\b", lowered):
        return TemporalQuery(kind="first", subject=subject, interval=interval)
    if re.search(r"\b(last|latest|most recent)\b", lowered):
        return TemporalQuery(kind="last", subject=subject, interval=interval)
    if interval is not None:
        return TemporalQuery(kind="overlap", subject=subject, interval=interval)
    return None
