"""Temporal facts, queries over fact sets, and answer entailment."""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import ReferenceNotFoundError
from .timepoints import TimeInterval, TimePoint, format_timepoint, intervals_overlap, sort_key

_IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def is_identifier(text: str) -> bool:
    return bool(_IDENTIFIER.match(text))


def canonical_entity(name: str) -> str:
    """Case-folded, whitespace-collapsed form used for every entity comparison."""
    return " ".join(unicodedata.normalize("NFC", name).casefold().split())


def _check_entity(value: str, what: str) -> str:
    if not isinstance(value, str):
        raise TypeError(f"{what} must be a string")
    value = value.strip()
    if not value:
        raise ValueError(f"{what} must be non-empty")
    return value


@dataclass(frozen=True)
class TemporalFact:
    relation: str
    subject: str
    object: str
    interval: TimeInterval
    # source line or sentence index; not part of fact identity
    provenance: Optional[int] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not is_identifier(self.relation):
            raise ValueError(f"relation is not an identifier: {self.relation!r}")
        object.__setattr__(self, "subject", _check_entity(self.subject, "subject"))
        object.__setattr__(self, "object", _check_entity(self.object, "object"))

    @property
    def start(self) -> TimePoint:
        return self.interval.start

    @property
    def end(self) -> TimePoint:
        return self.interval.end

    def canonical_key(self) -> tuple:
        return (
            self.relation,
            canonical_entity(self.subject),
            canonical_entity(self.object),
            self.interval,
        )

    def replace(self, **changes) -> "TemporalFact":
        values = dict(
            relation=self.relation,
            subject=self.subject,
            object=self.object,
            interval=self.interval,
            provenance=self.provenance,
        )
        values.update(changes)
        return TemporalFact(**values)

    def __str__(self) -> str:
        return (
            f"{self.relation}({self.subject}, {self.object}, "
            f"{format_timepoint(self.start, 'start')}, {format_timepoint(self.end, 'end')})"
        )


class FactSet(Sequence[TemporalFact]):
    """Immutable ordered collection of facts; duplicates are kept."""

    __slots__ = ("_facts",)

    def __init__(self, facts: Iterable[TemporalFact] = ()):
        self._facts = tuple(facts)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return FactSet(self._facts[index])
        return self._facts[index]

    def __len__(self) -> int:
        return len(self._facts)

    def __iter__(self) -> Iterator[TemporalFact]:
        return iter(self._facts)

    def __eq__(self, other) -> bool:
        if isinstance(other, FactSet):
            return self._facts == other._facts
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._facts)

    def __repr__(self) -> str:
        return f"FactSet({list(self._facts)!r})"

    @property
    def facts(self) -> tuple[TemporalFact, ...]:
        return self._facts

    def replace_at(self, index: int, fact: TemporalFact) -> "FactSet":
        if not 0 <= index < len(self._facts):
            raise IndexError(f"fact index {index} out of range for {len(self._facts)} facts")
        return FactSet(self._facts[:index] + (fact,) + self._facts[index + 1 :])

    def duplicate_indices(self) -> list[int]:
        """Indices of facts whose canonical form already appeared earlier."""
        seen: set = set()
        dupes = []
        for i, fact in enumerate(self._facts):
            key = fact.canonical_key()
            if key in seen:
                dupes.append(i)
            seen.add(key)
        return dupes

    def dedup(self) -> "FactSet":
        dupes = set(self.duplicate_indices())
        return FactSet(f for i, f in enumerate(self._facts) if i not in dupes)


class QueryKind(str, enum.Enum):
    OVERLAP = "overlap"
    BEFORE = "before"
    AFTER = "after"
    FIRST = "first"
    LAST = "last"


@dataclass(frozen=True)
class TemporalQuery:
    kind: QueryKind = QueryKind.OVERLAP
    subject: Optional[str] = None
    relation: Optional[str] = None
    interval: Optional[TimeInterval] = None
    reference_object: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", QueryKind(self.kind))
        if self.kind is QueryKind.OVERLAP and self.interval is None:
            raise ValueError("overlap queries require an interval")
        if self.kind in (QueryKind.BEFORE, QueryKind.AFTER) and not self.reference_object:
            raise ValueError(f"{self.kind.value} queries require a reference object")
        if self.relation is not None and not is_identifier(self.relation):
            raise ValueError(f"relation is not an identifier: {self.relation!r}")
        if self.subject is not None:
            object.__setattr__(self, "subject", _check_entity(self.subject, "subject"))


@dataclass(frozen=True)
class AnswerCandidate:
    relation: str
    subject: str
    object: str
    interval: Optional[TimeInterval] = None

    def __post_init__(self) -> None:
        if not is_identifier(self.relation):
            raise ValueError(f"relation is not an identifier: {self.relation!r}")
        object.__setattr__(self, "subject", _check_entity(self.subject, "subject"))
        object.__setattr__(self, "object", _check_entity(self.object, "object"))

    @classmethod
    def from_fact(cls, fact: TemporalFact, with_interval: bool = True) -> "AnswerCandidate":
        return cls(fact.relation, fact.subject, fact.object, fact.interval if with_interval else None)

    def canonical_key(self) -> tuple:
        return (self.relation, canonical_entity(self.subject), canonical_entity(self.object), self.interval)

    def __str__(self) -> str:
        text = f"{self.relation}({self.subject}, {self.object})"
        if self.interval is not None:
            text += f" @ {self.interval}"
        return text


def filter_relevant(facts: Iterable[TemporalFact], query_interval: TimeInterval) -> FactSet:
    return FactSet(f for f in facts if intervals_overlap(f.interval, query_interval))


def filter_subject(facts: Iterable[TemporalFact], subject: str) -> FactSet:
    wanted = canonical_entity(subject)
    if not wanted:
        raise ValueError("subject must be non-empty")
    return FactSet(f for f in facts if canonical_entity(f.subject) == wanted)


def find_reference(
    facts: Iterable[TemporalFact],
    reference_object: str,
    relation: Optional[str] = None,
    subject: Optional[str] = None,
) -> TemporalFact:
    """First fact whose object is ``reference_object`` (and relation/subject, when given)."""
    ref = canonical_entity(reference_object)
    subj = canonical_entity(subject) if subject else None
    for fact in facts:
        if canonical_entity(fact.object) != ref:
            continue
        if relation is not None and fact.relation != relation:
            continue
        if subj is not None and canonical_entity(fact.subject) != subj:
            continue
        return fact
    raise ReferenceNotFoundError(reference_object)


def find_adjacent(
    facts: Iterable[TemporalFact],
    relation: str,
    subject: str,
    reference_object: str,
    direction: str,
) -> Optional[TemporalFact]:
    """Nearest fact of the same relation and subject on one side of the reference fact.

    ``before`` picks the fact with the latest end not after the reference start;
    ``after`` picks the earliest start not before the reference end. Endpoints
    are compared at start-side widening so ``1949`` meets ``1949-01``. Ties go
    to an exact endpoint match, then the latest start (before) / earliest end
    (after), then the lexicographically smallest object.
    """
    if direction not in ("before", "after"):
        raise ValueError(f"direction must be 'before' or 'after', got {direction!r}")
    facts = list(facts)
    reference = find_reference(facts, reference_object, relation, subject)
    ref_obj = canonical_entity(reference.object)
    subj = canonical_entity(subject)

    best = None
    best_key = None
    for fact in facts:
        if fact.relation != relation or canonical_entity(fact.subject) != subj:
            continue
        if canonical_entity(fact.object) == ref_obj:
            continue
        if direction == "before":
            boundary = sort_key(fact.end)
            if boundary > sort_key(reference.start):
                continue
            exact = fact.end == reference.start
            # maximise end, prefer exact, then latest start, then smallest object
            key = (boundary, exact, sort_key(fact.start), _Reverse(canonical_entity(fact.object)))
        else:
            boundary = sort_key(fact.start)
            if boundary < sort_key(reference.end):
                continue
            exact = fact.start == reference.end
            key = (_Reverse(boundary), exact, _Reverse(sort_key(fact.end, "end")), _Reverse(canonical_entity(fact.object)))
        if best_key is None or key > best_key:
            best, best_key = fact, key
    return best


class _Reverse:
    """Inverts the ordering of a wrapped comparable value."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __eq__(self, other):
        return self.value == other.value

    def __lt__(self, other):
        return other.value < self.value

    def __gt__(self, other):
        return other.value > self.value


def entails(fact: TemporalFact, candidate: AnswerCandidate) -> bool:
    if fact.relation != candidate.relation:
        return False
    if canonical_entity(fact.subject) != canonical_entity(candidate.subject):
        return False
    if canonical_entity(fact.object) != canonical_entity(candidate.object):
        return False
    return candidate.interval is None or intervals_overlap(candidate.interval, fact.interval)


class ViolationKind(str, enum.Enum):
    UNSUPPORTED_CANDIDATE = "unsupported_candidate"
    INVERTED_INTERVAL = "inverted_interval"
    SUBJECT_MISMATCH = "subject_mismatch"
    INTERVAL_MISMATCH = "interval_mismatch"
    DANGLING_REFERENCE = "dangling_reference"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str
    fact_indices: tuple[int, ...] = ()
    candidate_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "detail": self.detail,
            "fact_indices": list(self.fact_indices),
            "candidate_index": self.candidate_index,
        }


@dataclass(frozen=True)
class ConsistencyReport:
    candidates: tuple[AnswerCandidate, ...] = ()
    violations: tuple[Violation, ...] = ()
    # candidate index -> index of the first fact that entails it
    supported: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if not self.violations and len(self.supported) == len(self.candidates):
            return "consistent"
        return "inconsistent"

    @property
    def consistent(self) -> bool:
        return self.status == "consistent"

    @property
    def unsupported(self) -> list[int]:
        return [i for i in range(len(self.candidates)) if i not in self.supported]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "candidates": [str(c) for c in self.candidates],
            "supported": {str(k): v for k, v in sorted(self.supported.items())},
            "unsupported": self.unsupported,
            "violations": [v.to_dict() for v in self.violations],
        }

    def render(self) -> str:
        """Plain-text report suitable for embedding in a prompt."""
        lines = [f"Consistency status: {self.status}"]
        for i, cand in enumerate(self.candidates):
            if i in self.supported:
                lines.append(f"- candidate {i} {cand}: supported by fact {self.supported[i]}")
            else:
                lines.append(f"- candidate {i} {cand}: NOT supported by any fact")
        if self.violations:
            lines.append("Violations:")
            for n, v in enumerate(self.violations, 1):
                where = f" (facts {', '.join(map(str, v.fact_indices))})" if v.fact_indices else ""
                lines.append(f"{n}. [{v.kind.value}] {v.detail}{where}")
        return "\n".join(lines)


def find_witness(facts: Sequence[TemporalFact], candidate: AnswerCandidate) -> Optional[int]:
    for j, fact in enumerate(facts):
        if entails(fact, candidate):
            return j
    return None


def verify_answer(facts: Sequence[TemporalFact], candidates: Sequence[AnswerCandidate]) -> ConsistencyReport:
    """Check that every candidate is entailed by at least one fact."""
    supported = {}
    violations = []
    for i, cand in enumerate(candidates):
        witness = find_witness(facts, cand)
        if witness is None:
            violations.append(
                Violation(
                    ViolationKind.UNSUPPORTED_CANDIDATE,
                    f"no fact entails {cand}",
                    candidate_index=i,
                )
            )
        else:
            supported[i] = witness
    return ConsistencyReport(tuple(candidates), tuple(violations), supported)
