"""Neuro-symbolic temporal question answering: interval facts, a staged prompting loop, and scoring."""

from .audit import RepairHypothesis, RepairKind, apply_repair, audit, propose_repairs
from .backends import BackendRequest, MockBackend, ModelBackend, OpenAIChatBackend
from .core import (
    AnswerCandidate,
    ConsistencyReport,
    FactSet,
    QueryKind,
    TemporalFact,
    TemporalQuery,
    Violation,
    ViolationKind,
    entails,
    filter_relevant,
    filter_subject,
    find_adjacent,
    find_reference,
    verify_answer,
)
from .errors import SymtimeError
from .evaluation import EvalRecord, aggregate, exact_match, load_dataset, normalize_answer, score_predictions, token_f1
from .pipeline import PipelineConfig, PipelineTrace, extract_candidates, run_pipeline, run_with_repeats
from .prompts import build_stage_prompt
from .symbolic import answer_query
from .text import (
    Stage,
    SymbolicFormat,
    normalize_timestamp,
    parse_fact,
    parse_fact_block,
    parse_tagged_output,
    serialize_fact,
)
from .timepoints import NEG_INF, POS_INF, TimeInterval, TimePoint, compare_timepoints, intervals_overlap

__all__ = [
    "NEG_INF",
    "POS_INF",
    "aggregate",
    "answer_query",
    "AnswerCandidate",
    "apply_repair",
    "audit",
    "BackendRequest",
    "build_stage_prompt",
    "compare_timepoints",
    "ConsistencyReport",
    "entails",
    "EvalRecord",
    "exact_match",
    "extract_candidates",
    "FactSet",
    "filter_relevant",
    "filter_subject",
    "find_adjacent",
    "find_reference",
    "intervals_overlap",
    "load_dataset",
    "MockBackend",
    "ModelBackend",
    "normalize_answer",
    "normalize_timestamp",
    "OpenAIChatBackend",
    "parse_fact",
    "parse_fact_block",
    "parse_tagged_output",
    "PipelineConfig",
    "PipelineTrace",
    "propose_repairs",
    "QueryKind",
    "RepairHypothesis",
    "RepairKind",
    "run_pipeline",
    "run_with_repeats",
    "score_predictions",
    "serialize_fact",
    "Stage",
    "SymbolicFormat",
    "SymtimeError",
    "TemporalFact",
    "TemporalQuery",
    "TimeInterval",
    "TimePoint",
    "token_f1",
    "verify_answer",
    "Violation",
    "ViolationKind",
]
