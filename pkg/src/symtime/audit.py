"""Deterministic consistency checks over facts and answer candidates, plus repair hypotheses."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    AnswerCandidate,
    ConsistencyReport,
    FactSet,
    QueryKind,
    TemporalFact,
    TemporalQuery,
    Violation,
    ViolationKind,
    canonical_entity,
    entails,
    find_reference,
)
from .errors import PreconditionError, ReferenceNotFoundError
from .timepoints import intervals_overlap


def _same_triple(fact: TemporalFact, cand: AnswerCandidate) -> bool:
    return (
        fact.relation == cand.relation
        and canonical_entity(fact.subject) == canonical_entity(cand.subject)
        and canonical_entity(fact.object) == canonical_entity(cand.object)
    )


def audit(
    facts: Sequence[TemporalFact],
    candidates: Sequence[AnswerCandidate],
    query: Optional[TemporalQuery] = None,
) -> ConsistencyReport:
    """Enumerate every violation, check by check.

    In order: inverted fact intervals; candidates without an entailing fact
    (``interval_mismatch`` when some fact has the same relation, subject and
    object but a disjoint interval, else ``unsupported_candidate``); candidate
    subjects differing from the query subject; candidate intervals disjoint
    from the query interval; before/after references missing from the facts.
    """
    facts = list(facts)
    violations: list[Violation] = []
    supported: dict[int, int] = {}

    for i, fact in enumerate(facts):
        if fact.interval.is_inverted:
            violations.append(
                Violation(ViolationKind.INVERTED_INTERVAL, f"fact {i} {fact} starts after it ends", (i,))
            )

    for c, cand in enumerate(candidates):
        witness = next((j for j, f in enumerate(facts) if entails(f, cand)), None)
        if witness is not None:
            supported[c] = witness
            continue
        near = tuple(j for j, f in enumerate(facts) if _same_triple(f, cand))
        if near:
            violations.append(
                Violation(
                    ViolationKind.INTERVAL_MISMATCH,
                    f"candidate {c} {cand} claims a period no matching fact covers",
                    near,
                    c,
                )
            )
        else:
            violations.append(
                Violation(ViolationKind.UNSUPPORTED_CANDIDATE, f"no fact entails candidate {c} {cand}", (), c)
            )

    if query is not None and query.subject:
        wanted = canonical_entity(query.subject)
        for c, cand in enumerate(candidates):
            if canonical_entity(cand.subject) != wanted:
                backing = tuple(j for j, f in enumerate(facts) if _same_triple(f, cand))
                violations.append(
                    Violation(
                        ViolationKind.SUBJECT_MISMATCH,
                        f"candidate {c} is about {cand.subject!r} but the question asks about {query.subject!r}",
                        backing,
                        c,
                    )
                )

    if query is not None and query.interval is not None:
        for c, cand in enumerate(candidates):
            if cand.interval is not None and not intervals_overlap(cand.interval, query.interval):
                violations.append(
                    Violation(
                        ViolationKind.INTERVAL_MISMATCH,
                        f"candidate {c} period {cand.interval} lies outside the question period {query.interval}",
                        (),
                        c,
                    )
                )

    if query is not None and query.kind in (QueryKind.BEFORE, QueryKind.AFTER):
        try:
            find_reference(facts, query.reference_object, query.relation, query.subject)
        except ReferenceNotFoundError:
            violations.append(
                Violation(
                    ViolationKind.DANGLING_REFERENCE,
                    f"reference {query.reference_object!r} does not appear as an object of any matching fact",
                )
            )

    return ConsistencyReport(tuple(candidates), tuple(violations), supported)


class RepairKind(str, enum.Enum):
    SWAP_BOUNDS = "swap_bounds"
    WIDEN_GRANULARITY = "widen_granularity"
    MISSING_FACT = "missing_fact"
    RELABEL_SUBJECT = "relabel_subject"


_REPAIR_RANK = {kind: rank for rank, kind in enumerate(RepairKind)}
APPLICABLE = frozenset({RepairKind.SWAP_BOUNDS, RepairKind.WIDEN_GRANULARITY, RepairKind.RELABEL_SUBJECT})


@dataclass(frozen=True)
class RepairHypothesis:
    kind: RepairKind
    rendered_suggestion: str
    fact_index: Optional[int] = None
    candidate_index: Optional[int] = None
    new_subject: Optional[str] = None

    @property
    def applicable(self) -> bool:
        """Whether :func:`apply_repair` can carry this out on the fact set."""
        return self.kind in APPLICABLE and self.fact_index is not None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "fact_index": self.fact_index,
            "candidate_index": self.candidate_index,
            "new_subject": self.new_subject,
            "suggestion": self.rendered_suggestion,
        }


def propose_repairs(
    report: ConsistencyReport,
    facts: Sequence[TemporalFact],
    query: Optional[TemporalQuery] = None,
) -> list[RepairHypothesis]:
    """Minimal edits that would explain each violation, cheapest kind first."""
    if report.consistent:
        raise PreconditionError("propose_repairs needs an inconsistent report")
    facts = list(facts)
    hyps: list[RepairHypothesis] = []

    for v in report.violations:
        cand = report.candidates[v.candidate_index] if v.candidate_index is not None else None

        if v.kind is ViolationKind.INVERTED_INTERVAL:
            i = v.fact_indices[0]
            fixed = facts[i].interval.swapped()
            hyps.append(
                RepairHypothesis(
                    RepairKind.SWAP_BOUNDS,
                    f"Fact {i} ({facts[i]}) has its dates reversed; it probably holds over {fixed}.",
                    fact_index=i,
                )
            )

        elif v.kind is ViolationKind.INTERVAL_MISMATCH and v.fact_indices:
            for j in v.fact_indices:
                if intervals_overlap(cand.interval, facts[j].interval.coarsened()):
                    hyps.append(
                        RepairHypothesis(
                            RepairKind.WIDEN_GRANULARITY,
                            f"Fact {j} ({facts[j]}) may be stated too precisely; read at year granularity "
                            f"it covers {facts[j].interval.coarsened()}, which overlaps {cand.interval}.",
                            fact_index=j,
                            candidate_index=v.candidate_index,
                        )
                    )
                    break
            else:
                hyps.append(_missing_fact(v.candidate_index, cand))

        elif v.kind is ViolationKind.INTERVAL_MISMATCH:
            if query is not None and intervals_overlap(cand.interval.coarsened(), query.interval.coarsened()):
                hyps.append(
                    RepairHypothesis(
                        RepairKind.WIDEN_GRANULARITY,
                        f"Candidate {v.candidate_index} period {cand.interval} and the question period "
                        f"{query.interval} agree at year granularity; a date may have been misread.",
                        candidate_index=v.candidate_index,
                    )
                )

        elif v.kind is ViolationKind.UNSUPPORTED_CANDIDATE:
            near = [
                j
                for j, f in enumerate(facts)
                if f.relation == cand.relation and canonical_entity(f.object) == canonical_entity(cand.object)
            ]
            if near:
                j = near[0]
                hyps.append(
                    RepairHypothesis(
                        RepairKind.RELABEL_SUBJECT,
                        f"Candidate {v.candidate_index} names {cand.subject!r}, but fact {j} ({facts[j]}) "
                        f"gives the subject as {facts[j].subject!r}.",
                        candidate_index=v.candidate_index,
                        new_subject=facts[j].subject,
                    )
                )
            else:
                hyps.append(_missing_fact(v.candidate_index, cand))

        elif v.kind is ViolationKind.SUBJECT_MISMATCH:
            target = query.subject if query is not None and query.subject else None
            if v.fact_indices and target:
                for j in v.fact_indices:
                    hyps.append(
                        RepairHypothesis(
                            RepairKind.RELABEL_SUBJECT,
                            f"Fact {j} ({facts[j]}) may refer to {target!r} under another name.",
                            fact_index=j,
                            candidate_index=v.candidate_index,
                            new_subject=target,
                        )
                    )
            else:
                hyps.append(
                    RepairHypothesis(
                        RepairKind.RELABEL_SUBJECT,
                        f"Candidate {v.candidate_index} ({cand}) is about the wrong subject"
                        + (f"; the question asks about {target!r}." if target else "."),
                        candidate_index=v.candidate_index,
                        new_subject=target,
                    )
                )

        elif v.kind is ViolationKind.DANGLING_REFERENCE:
            ref = query.reference_object if query is not None else "the reference"
            hyps.append(
                RepairHypothesis(
                    RepairKind.MISSING_FACT,
                    f"No fact mentions {ref!r}; an event involving it may have been omitted from the representation.",
                )
            )

    unique = list(dict.fromkeys(hyps))
    return sorted(unique, key=lambda h: _REPAIR_RANK[h.kind])


def _missing_fact(index: Optional[int], cand: AnswerCandidate) -> RepairHypothesis:
    return RepairHypothesis(
        RepairKind.MISSING_FACT,
        f"Nothing supports candidate {index} ({cand}); an intermediate event involving "
        f"{cand.object!r} may have been omitted, or the conclusion is wrong.",
        candidate_index=index,
    )


def render_repairs(hypotheses: Sequence[RepairHypothesis]) -> str:
    return "\n".join(f"{n}. {h.rendered_suggestion}" for n, h in enumerate(hypotheses, 1))


def apply_repair(facts: Sequence[TemporalFact], hypothesis: RepairHypothesis) -> FactSet:
    """Return a copy of ``facts`` with the single edit ``hypothesis`` describes."""
    facts = FactSet(facts)
    if hypothesis.kind is RepairKind.MISSING_FACT:
        raise PreconditionError("missing_fact hypotheses are for the model to resolve, not applied to facts")
    if hypothesis.fact_index is None:
        raise PreconditionError(f"{hypothesis.kind.value} hypothesis targets a candidate, not a fact")
    i = hypothesis.fact_index
    if not 0 <= i < len(facts):
        raise IndexError(f"fact index {i} out of range for {len(facts)} facts")
    fact = facts[i]
    if hypothesis.kind is RepairKind.SWAP_BOUNDS:
        edited = fact.replace(interval=fact.interval.swapped())
    elif hypothesis.kind is RepairKind.WIDEN_GRANULARITY:
        edited = fact.replace(interval=fact.interval.coarsened())
    else:
        if not hypothesis.new_subject:
            raise PreconditionError("relabel_subject hypothesis carries no new subject")
        edited = fact.replace(subject=hypothesis.new_subject)
    return facts.replace_at(i, edited)
