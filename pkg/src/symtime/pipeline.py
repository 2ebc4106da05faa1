"""Staged prompting loop: representation, inference, consistency check, reflection, answer.

Each stage is one backend request whose output is read from the stage's tag.
After inference, answer candidates are pulled out of the model's text and
audited against the extracted facts; a failed audit triggers a bounded
number of reflection rounds that carry the audit report back to the model.
"""

from __future__ import annotations

import enum
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .audit import RepairKind, apply_repair, audit, propose_repairs, render_repairs
from .backends import BackendRequest, MockScriptError, ModelBackend
from .core import AnswerCandidate, ConsistencyReport, FactSet, TemporalQuery, canonical_entity
from .errors import BackendError, PipelineError
from .evaluation import EvalRecord
from .prompts import build_stage_prompt
from .symbolic import SymbolicAnswer, answer_query, infer_query
from .text import (
    ParseDiagnostic,
    Stage,
    StageBlock,
    SymbolicFormat,
    first_block,
    parse_fact_block,
    scan_predicates,
    serialize_fact,
    serialize_facts,
)

logger = logging.getLogger(__name__)

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0
ANSWER_ATTEMPTS = 3


class Ablation(str, enum.Enum):
    DISABLE_SYMBOLIC = "disable_symbolic"
    DISABLE_CONSISTENCY = "disable_consistency"
    DISABLE_REFLECTION = "disable_reflection"
    SYMBOLIC_ONLY = "symbolic_only"


# ablation rows in the order they are reported, full pipeline last
VARIANTS = {
    "symbolic_only": frozenset({Ablation.SYMBOLIC_ONLY}),
    "no_symbol": frozenset({Ablation.DISABLE_SYMBOLIC}),
    "no_consistency": frozenset({Ablation.DISABLE_CONSISTENCY}),
    "no_reflection": frozenset({Ablation.DISABLE_REFLECTION}),
    "full": frozenset(),
}
VARIANT_LABELS = {
    "symbolic_only": "Symbolic only",
    "no_symbol": "w/o Symbol",
    "no_consistency": "w/o Consistency Check",
    "no_reflection": "w/o Abductive Reflection",
    "full": "Full pipeline",
}


@dataclass(frozen=True)
class PipelineConfig:
    ablations: frozenset = frozenset()
    max_reflections: int = 2
    format: SymbolicFormat = SymbolicFormat.QUADRUPLE
    temperature: float = 0.1
    num_runs: int = 3
    max_tokens: int = 1024
    # apply swap_bounds / widen_granularity repairs to the facts before reflecting
    auto_repair: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "ablations", frozenset(Ablation(a) for a in self.ablations))
        object.__setattr__(self, "format", SymbolicFormat(self.format))
        if Ablation.SYMBOLIC_ONLY in self.ablations and len(self.ablations) > 1:
            raise ValueError("symbolic_only cannot be combined with other ablations")
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be non-negative")
        if (self.max_reflections == 0) != (Ablation.DISABLE_REFLECTION in self.ablations):
            raise ValueError("max_reflections must be 0 exactly when disable_reflection is set")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.num_runs < 1:
            raise ValueError("num_runs must be at least 1")

    @classmethod
    def variant(cls, name: str, **overrides) -> "PipelineConfig":
        if name not in VARIANTS:
            raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
        ablations = VARIANTS[name]
        if Ablation.DISABLE_REFLECTION in ablations:
            overrides["max_reflections"] = 0
        elif overrides.get("max_reflections") == 0:
            overrides["max_reflections"] = cls.max_reflections
        return cls(ablations=ablations, **overrides)

    @property
    def symbolic_only(self) -> bool:
        return Ablation.SYMBOLIC_ONLY in self.ablations

    @property
    def disable_symbolic(self) -> bool:
        return Ablation.DISABLE_SYMBOLIC in self.ablations

    @property
    def disable_consistency(self) -> bool:
        return Ablation.DISABLE_CONSISTENCY in self.ablations

    @property
    def disable_reflection(self) -> bool:
        return Ablation.DISABLE_REFLECTION in self.ablations

    def to_dict(self) -> dict:
        return {
            "ablations": sorted(a.value for a in self.ablations),
            "max_reflections": self.max_reflections,
            "format": self.format.value,
            "temperature": self.temperature,
            "num_runs": self.num_runs,
            "max_tokens": self.max_tokens,
            "auto_repair": self.auto_repair,
        }


@dataclass
class CallRecord:
    stage: str
    round: int
    attempts: int
    prompt: str
    response: str

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "round": self.round,
            "attempts": self.attempts,
            "prompt": self.prompt,
            "response": self.response,
        }


@dataclass
class ReflectionRound:
    round: int
    feedback: str
    hypotheses: list
    applied_repairs: list
    body: str
    candidates: list
    # "facts+inference" when repairs were applied to the fact set, else "inference"
    path: str

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "feedback": self.feedback,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "applied_repairs": [h.to_dict() for h in self.applied_repairs],
            "body": self.body,
            "candidates": [str(c) for c in self.candidates],
            "path": self.path,
        }


@dataclass
class PipelineTrace:
    question: str
    context: str
    item_id: str = ""
    run: int = 0
    config: dict = field(default_factory=dict)
    stages: list[StageBlock] = field(default_factory=list)
    facts: Optional[FactSet] = None
    working_facts: Optional[FactSet] = None
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)
    candidates: list[AnswerCandidate] = field(default_factory=list)
    reports: list[ConsistencyReport] = field(default_factory=list)
    model_verdicts: list = field(default_factory=list)
    reflections: list[ReflectionRound] = field(default_factory=list)
    pending_feedback: Optional[str] = None
    calls: list[CallRecord] = field(default_factory=list)
    symbolic_note: Optional[str] = None
    final_answer: Optional[str] = None
    answer_supported: Optional[bool] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def reflection_count(self) -> int:
        return len(self.reflections)

    def stage_names(self) -> list[str]:
        return [b.stage.value for b in self.stages]

    def current_conclusions(self) -> str:
        for block in reversed(self.stages):
            if block.stage in (Stage.REFLECTION, Stage.INFERENCE):
                return block.body.strip() or "(none)"
        return "(none)"

    def add_stage(self, stage: Stage, body: str, span=(0, 0), closed: bool = True) -> StageBlock:
        block = StageBlock(stage, body, len(self.stages), tuple(span), closed)
        self.stages.append(block)
        return block

    def to_dict(self) -> dict:
        fmt = SymbolicFormat(self.config.get("format", "quadruple"))
        return {
            "item_id": self.item_id,
            "run": self.run,
            "question": self.question,
            "context": self.context,
            "config": self.config,
            "stages": [b.to_dict() for b in self.stages],
            "facts": None if self.facts is None else [serialize_fact(f, fmt) for f in self.facts],
            "working_facts": None
            if self.working_facts is None
            else [serialize_fact(f, fmt) for f in self.working_facts],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "candidates": [str(c) for c in self.candidates],
            "reports": [r.to_dict() for r in self.reports],
            "model_verdicts": self.model_verdicts,
            "reflections": [r.to_dict() for r in self.reflections],
            "reflection_count": self.reflection_count,
            "calls": [c.to_dict() for c in self.calls],
            "symbolic_note": self.symbolic_note,
            "final_answer": self.final_answer,
            "answer_supported": self.answer_supported,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


def extract_candidates(inference_body: str, facts: Optional[Sequence] = None) -> list[AnswerCandidate]:
    """Answer candidates stated in free text.

    Every embedded predicate (any format) becomes a candidate with its
    interval. Outside those predicates, each verbatim mention of a fact's
    object becomes a candidate carrying that fact's relation and subject and
    no interval, unless a predicate already stated that triple. Duplicates
    are dropped, first occurrence wins.
    """
    found: list[AnswerCandidate] = []
    masked = list(inference_body)
    for fact, (start, end) in scan_predicates(inference_body):
        found.append(AnswerCandidate.from_fact(fact))
        masked[start:end] = " " * (end - start)
    text = canonical_entity("".join(masked))
    stated = {c.canonical_key()[:3] for c in found}
    mentions = []
    for fact in facts or ():
        if fact.canonical_key()[:3] in stated:
            continue
        m = re.search(r"(?<!\w)" + re.escape(canonical_entity(fact.object)) + r"(?!\w)", text)
        if m:
            mentions.append((m.start(), AnswerCandidate.from_fact(fact, with_interval=False)))
    found.extend(c for _, c in sorted(mentions, key=lambda pair: pair[0]))

    unique: dict[tuple, AnswerCandidate] = {}
    for cand in found:
        unique.setdefault(cand.canonical_key(), cand)
    return list(unique.values())


_VERDICT = re.compile(r"verdict\s*:\s*\**\s*(inconsistent|consistent)", re.IGNORECASE)


def parse_verdict(body: str) -> Optional[str]:
    matches = _VERDICT.findall(body)
    return matches[-1].lower() if matches else None


def _complete(backend: ModelBackend, request: BackendRequest, sleep: Callable[[float], None]) -> tuple[str, int]:
    delay = RETRY_BASE_DELAY
    for attempt in range(1, RETRY_ATTEMPTS + 1):
        try:
            return backend.complete(request), attempt
        except BackendError as exc:
            logger.warning("%s request failed (attempt %d/%d): %s", request.stage, attempt, RETRY_ATTEMPTS, exc)
            if attempt == RETRY_ATTEMPTS:
                raise PipelineError(f"{request.stage} request failed after {RETRY_ATTEMPTS} attempts: {exc}") from exc
            sleep(delay)
            delay *= 2
        except MockScriptError as exc:
            raise PipelineError(str(exc)) from exc
    raise AssertionError("unreachable")


class _Runner:
    def __init__(self, trace: PipelineTrace, backend: ModelBackend, config: PipelineConfig, sleep):
        self.trace = trace
        self.backend = backend
        self.config = config
        self.sleep = sleep

    def ask(self, stage: Stage) -> str:
        request = build_stage_prompt(stage, self.trace, self.config)
        text, attempts = _complete(self.backend, request, self.sleep)
        self.trace.calls.append(CallRecord(stage.value, request.round, attempts, request.user_prompt, text))
        return text

    def stage_output(self, stage: Stage, text: str) -> StageBlock:
        block = first_block(text, stage)
        if block is None:
            self.trace.diagnostics.append(
                ParseDiagnostic("warning", f"response has no <{stage.value}> tag; using the whole text", (0, len(text)))
            )
            return self.trace.add_stage(stage, text, (0, len(text)), closed=False)
        return self.trace.add_stage(stage, block.body, block.span, block.closed)


def run_pipeline(
    question: str,
    context: str,
    backend: ModelBackend,
    config: PipelineConfig,
    *,
    item_id: str = "",
    run: int = 0,
    query: Optional[TemporalQuery] = None,
    facts: Optional[FactSet] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> PipelineTrace:
    """Run one question through the staged loop and return its full trace.

    ``query`` adds question constraints (subject, period, reference) to the
    deterministic audit. ``facts`` are only used by the symbolic-only
    variant, which otherwise parses the context as a fact block.

    Raises :class:`PipelineError` when the backend keeps failing; a missing
    ``<answer>`` is recorded in ``trace.error`` instead.
    """
    if not question or not question.strip():
        raise ValueError("question must be non-empty")
    trace = PipelineTrace(question, context, item_id, run, config.to_dict())

    if config.symbolic_only:
        _run_symbolic(trace, config, query, facts)
        return trace

    runner = _Runner(trace, backend, config, sleep)

    if not config.disable_symbolic:
        block = runner.stage_output(Stage.REPRESENTATION, runner.ask(Stage.REPRESENTATION))
        parsed, diagnostics = parse_fact_block(block.body)
        trace.diagnostics.extend(diagnostics)
        trace.facts = trace.working_facts = parsed

    block = runner.stage_output(Stage.INFERENCE, runner.ask(Stage.INFERENCE))
    symbolic = trace.facts is not None
    candidates = extract_candidates(block.body, trace.facts) if symbolic else []
    trace.candidates = candidates

    if not config.disable_consistency:
        while True:
            check = runner.stage_output(Stage.CONSISTENCY_CHECK, runner.ask(Stage.CONSISTENCY_CHECK))
            verdict = parse_verdict(check.body)
            trace.model_verdicts.append(verdict)
            report = None
            if symbolic:
                report = audit(trace.working_facts, candidates, query)
                trace.reports.append(report)
                failed = not report.consistent
            else:
                failed = verdict == "inconsistent"
            if not failed or trace.reflection_count >= config.max_reflections:
                break

            hypotheses, applied = [], []
            if report is not None:
                hypotheses = propose_repairs(report, trace.working_facts, query)
                if config.auto_repair:
                    for hyp in hypotheses:
                        if hyp.applicable and hyp.kind in (RepairKind.SWAP_BOUNDS, RepairKind.WIDEN_GRANULARITY):
                            trace.working_facts = apply_repair(trace.working_facts, hyp)
                            applied.append(hyp)
                feedback = report.render()
                if hypotheses:
                    feedback += "\nPossible revisions:\n" + render_repairs(hypotheses)
                if applied:
                    feedback += "\nAlready applied to the facts: " + "; ".join(
                        f"{h.kind.value} on fact {h.fact_index}" for h in applied
                    )
            else:
                feedback = "The model's own check reported an inconsistency:\n" + check.body.strip()
            trace.pending_feedback = feedback

            reflection = runner.stage_output(Stage.REFLECTION, runner.ask(Stage.REFLECTION))
            revised = extract_candidates(reflection.body, trace.working_facts) if symbolic else []
            if symbolic and not revised:
                revised = candidates
            trace.reflections.append(
                ReflectionRound(
                    round=trace.reflection_count + 1,
                    feedback=feedback,
                    hypotheses=hypotheses,
                    applied_repairs=applied,
                    body=reflection.body,
                    candidates=revised,
                    path="facts+inference" if applied else "inference",
                )
            )
            trace.pending_feedback = None
            candidates = revised
            trace.candidates = candidates

    for attempt in range(ANSWER_ATTEMPTS):
        text = runner.ask(Stage.ANSWER)
        block = first_block(text, Stage.ANSWER)
        if block is not None:
            trace.add_stage(Stage.ANSWER, block.body, block.span, block.closed)
            trace.final_answer = block.body.strip()
            break
        logger.warning("no <answer> block (attempt %d/%d)", attempt + 1, ANSWER_ATTEMPTS)
    else:
        trace.error = f"extraction error: no <answer> block after {ANSWER_ATTEMPTS} attempts"

    if trace.reports:
        trace.answer_supported = trace.reports[-1].consistent
    return trace


def _run_symbolic(
    trace: PipelineTrace, config: PipelineConfig, query: Optional[TemporalQuery], facts: Optional[FactSet]
) -> None:
    if facts is None:
        facts, diagnostics = parse_fact_block(trace.context)
        trace.diagnostics.extend(diagnostics)
    trace.facts = trace.working_facts = FactSet(facts)
    trace.add_stage(Stage.REPRESENTATION, serialize_facts(trace.facts, config.format))
    if query is None:
        query = infer_query(trace.question, trace.facts)
    if query is None:
        result = SymbolicAnswer("", note="question could not be mapped to a temporal query")
    else:
        result = answer_query(trace.facts, query)
    trace.symbolic_note = result.note or None
    trace.add_stage(Stage.ANSWER, result.answer)
    trace.final_answer = result.answer
    trace.answer_supported = result.fact is not None


def failed_trace(record: EvalRecord, run: int, config: PipelineConfig, error: str) -> PipelineTrace:
    trace = PipelineTrace(record.question, record.context, record.id, run, config.to_dict())
    trace.error = error
    return trace


def run_with_repeats(
    item: EvalRecord,
    backend: ModelBackend,
    config: PipelineConfig,
    sleep: Callable[[float], None] = time.sleep,
) -> list[PipelineTrace]:
    """Run ``item`` ``config.num_runs`` times; a failing run yields a trace with ``error`` set."""
    traces = []
    for run in range(config.num_runs):
        try:
            trace = run_pipeline(
                item.question,
                item.context,
                backend,
                config,
                item_id=item.id,
                run=run,
                query=item.query,
                facts=item.facts,
                sleep=sleep,
            )
        except PipelineError as exc:
            logger.error("item %s run %d failed: %s", item.id, run, exc)
            trace = failed_trace(item, run, config, str(exc))
        traces.append(trace)
    return traces


def run_dataset(
    records: Sequence[EvalRecord],
    backend: ModelBackend,
    config: PipelineConfig,
    *,
    parallelism: int = 4,
    on_item: Optional[Callable[[EvalRecord, list[PipelineTrace]], None]] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[str, list[PipelineTrace]]:
    """Run many items on a bounded worker pool.

    ``on_item`` is called once per finished item, never concurrently.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    results: dict[str, list[PipelineTrace]] = {}
    lock = threading.Lock()
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = {pool.submit(run_with_repeats, r, backend, config, sleep): r for r in records}
        for future in as_completed(futures):
            record = futures[future]
            traces = future.result()
            with lock:
                results[record.id] = traces
                if on_item is not None:
                    on_item(record, traces)
    return {r.id: results[r.id] for r in records if r.id in results}
