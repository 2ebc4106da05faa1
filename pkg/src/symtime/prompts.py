"""Stage prompts. Every prompt asks the model to wrap its output in the stage tag."""

from __future__ import annotations

from typing import TYPE_CHECKING

from .backends import BackendRequest
from .errors import SequencingError
from .text import Stage, SymbolicFormat, serialize_facts

if TYPE_CHECKING:
    from .pipeline import PipelineConfig, PipelineTrace

SYSTEM_PROMPT = (
    "You answer temporal questions by reasoning over explicit, time-stamped facts. "
    "Follow the requested output format exactly and put each part inside the tag you are asked for."
)

FORMAT_INSTRUCTIONS = {
    SymbolicFormat.QUADRUPLE: (
        "quadruple format, one predicate per line:\n"
        "relation(subject, object, start_time, end_time)\n"
        "e.g. works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)"
    ),
    SymbolicFormat.FOL: (
        "first-order logic format, one ground atom per line:\n"
        "holds(relation, subject, object, start_time, end_time)\n"
        "e.g. holds(works_for, Jaroslav Pelikan, Valparaiso University, 1946, 1949)"
    ),
    SymbolicFormat.DICT: (
        "dictionary format, one record per line:\n"
        "{relation: ..., subject: ..., object: ..., start: ..., end: ...}\n"
        "e.g. {relation: works_for, subject: Jaroslav Pelikan, object: Valparaiso University, start: 1946, end: 1949}"
    ),
}

TIME_RULES = (
    "Write times as YYYY, YYYY-MM or YYYY-MM-DD. Use 'unknown' for a missing start or end "
    "and 'present' for an ongoing end. Quote names containing commas or parentheses with double quotes. "
    "The relation must be a snake_case identifier."
)


def _require(trace: "PipelineTrace", stage: Stage, needed: Stage) -> None:
    if not any(b.stage is needed for b in trace.stages):
        raise SequencingError(f"{stage.value} prompt requested before any {needed.value} stage")


def _evidence(trace: "PipelineTrace", config: "PipelineConfig") -> str:
    if trace.facts is None:
        return f"Context:\n{trace.context}"
    facts = trace.working_facts if trace.working_facts is not None else trace.facts
    return "Facts:\n" + (serialize_facts(facts, config.format) or "(no facts extracted)")


def build_stage_prompt(stage: Stage | str, trace: "PipelineTrace", config: "PipelineConfig") -> BackendRequest:
    stage = Stage(stage)
    rounds = len(trace.reflections)

    if stage is Stage.REPRESENTATION:
        if config.disable_symbolic or config.symbolic_only:
            raise SequencingError("representation stage is disabled by the ablation settings")
        if trace.stages:
            raise SequencingError("representation must be the first stage")
        fmt = SymbolicFormat(config.format)
        body = (
            "Convert every time-stamped fact in the context into symbolic predicates in the "
            f"{fmt.value} {FORMAT_INSTRUCTIONS[fmt]}\n{TIME_RULES}\n\n"
            f"Context:\n{trace.context}\n\nQuestion: {trace.question}\n\n"
            "Write only the predicates, inside <representation></representation> tags."
        )
    elif stage is Stage.INFERENCE:
        if not config.disable_symbolic:
            _require(trace, stage, Stage.REPRESENTATION)
        if any(b.stage is Stage.INFERENCE for b in trace.stages):
            raise SequencingError("inference runs once per trace")
        body = (
            f"{_evidence(trace, config)}\n\nQuestion: {trace.question}\n\n"
            "Reason step by step. Keep only facts whose period overlaps the period the question asks about "
            "and whose subject is the one asked about; align end and start dates to find what came before "
            "or after. State each conclusion as a predicate in the same format as the facts. "
            "Put your reasoning inside <inference></inference> tags."
        )
    elif stage is Stage.CONSISTENCY_CHECK:
        _require(trace, stage, Stage.INFERENCE)
        if config.disable_consistency:
            raise SequencingError("consistency checking is disabled by the ablation settings")
        body = (
            f"{_evidence(trace, config)}\n\nQuestion: {trace.question}\n\n"
            f"Current conclusions:\n{trace.current_conclusions()}\n\n"
            "Check that every conclusion is supported by at least one fact and respects the question's "
            "time constraints. End with the line 'VERDICT: CONSISTENT' or 'VERDICT: INCONSISTENT'. "
            "Put your check inside <consistency_check></consistency_check> tags."
        )
    elif stage is Stage.REFLECTION:
        _require(trace, stage, Stage.CONSISTENCY_CHECK)
        pending = trace.pending_feedback
        if pending is None:
            raise SequencingError("reflection requires a failed consistency check")
        if rounds >= config.max_reflections:
            raise SequencingError("reflection budget exhausted")
        body = (
            f"{_evidence(trace, config)}\n\nQuestion: {trace.question}\n\n"
            f"Current conclusions:\n{trace.current_conclusions()}\n\n"
            f"The consistency check failed:\n{pending}\n\n"
            "Propose the smallest plausible revision: a misread date, swapped bounds, the wrong subject, "
            "or an omitted intermediate event. Then restate the revised conclusions as predicates. "
            "Put your reflection inside <reflection></reflection> tags."
        )
    else:
        _require(trace, stage, Stage.INFERENCE)
        body = (
            f"{_evidence(trace, config)}\n\nQuestion: {trace.question}\n\n"
            f"Verified conclusions:\n{trace.current_conclusions()}\n\n"
            "Give only the concise final answer (an entity name or a date), inside <answer></answer> tags."
        )

    return BackendRequest(
        system_prompt=SYSTEM_PROMPT,
        user_prompt=body,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        stage=stage.value,
        round=rounds,
        item_id=trace.item_id,
        run=trace.run,
    )
