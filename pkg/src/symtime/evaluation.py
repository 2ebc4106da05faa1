"""Answer normalisation, EM / token F1, dataset adapters and score aggregation."""

from __future__ import annotations

import json
import logging
import string
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .core import FactSet, TemporalQuery
from .errors import AggregationError, DatasetError, EmptyDatasetError, ParseError
from .text import normalize_timestamp, parse_fact
from .timepoints import NEG_INF, POS_INF, TimeInterval

logger = logging.getLogger(__name__)

DATASETS = ("timeqa-easy", "timeqa-hard", "tempreason-l2", "tempreason-l3", "custom")
DISPLAY_NAMES = {
    "timeqa-easy": "TimeQA-Easy",
    "timeqa-hard": "TimeQA-Hard",
    "tempreason-l2": "TempReason-L2",
    "tempreason-l3": "TempReason-L3",
    "custom": "Custom",
}

_PUNCT = set(string.punctuation)
_ARTICLES = {"a", "an", "the"}


def normalize_answer(text: str) -> str:
    """Lowercase, strip ASCII punctuation, drop article tokens, collapse whitespace."""
    text = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    return " ".join(tok for tok in text.split() if tok not in _ARTICLES)


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    if not golds:
        raise ValueError("at least one gold answer is required")
    pred = normalize_answer(prediction)
    return int(any(pred == normalize_answer(g) for g in golds))


def _f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        # both empty means the normalised strings are equal
        return float(pred_tokens == gold_tokens)
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(prediction: str, golds: Sequence[str]) -> float:
    """Multiset token F1, maximised over the gold aliases."""
    if not golds:
        raise ValueError("at least one gold answer is required")
    pred = normalize_answer(prediction).split()
    return max(_f1(pred, normalize_answer(g).split()) for g in golds)


# -- datasets ---------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    context: str
    gold_answers: tuple[str, ...]
    dataset: str = "custom"
    query: Optional[TemporalQuery] = None
    facts: Optional[FactSet] = None

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise ValueError("gold_answers must be non-empty")
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset label {self.dataset!r}")


@dataclass(frozen=True)
class LineDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def parse_query(spec: dict) -> TemporalQuery:
    """Build a query from its JSON form.

    Keys: ``kind``, ``subject``, ``relation``, ``from``, ``to``, ``reference``.
    A missing ``from``/``to`` bound is unbounded when the other one is given.
    """
    start = spec.get("from")
    end = spec.get("to")
    interval = None
    if start is not None or end is not None:
        interval = TimeInterval(
            normalize_timestamp(str(start), "start") if start is not None else NEG_INF,
            normalize_timestamp(str(end), "end") if end is not None else POS_INF,
        )
    kind = spec.get("kind") or ("overlap" if interval is not None else None)
    if kind is None:
        raise ValueError("query needs a kind or a time range")
    return TemporalQuery(
        kind=kind,
        subject=spec.get("subject"),
        relation=spec.get("relation"),
        interval=interval,
        reference_object=spec.get("reference"),
    )


def _as_answers(value) -> list[str]:
    if isinstance(value, dict):
        value = value.get("text", [])
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        raise ValueError("answers must be a list of strings")
    answers = [a for a in value if isinstance(a, str) and a.strip()]
    if not answers:
        raise ValueError("answers must be a non-empty list of strings")
    return answers


def _as_context(value) -> str:
    if isinstance(value, list):
        return "\n".join(str(v) for v in value)
    if not isinstance(value, str):
        raise ValueError("context must be a string or list of strings")
    return value


def _first(obj: dict, *keys):
    for key in keys:
        if key in obj:
            return obj[key]
    raise KeyError(keys[0])


def _canonical(obj: dict, default_dataset: str) -> EvalRecord:
    facts = obj.get("facts")
    if facts is not None:
        lines = facts.split("\n") if isinstance(facts, str) else list(facts)
        try:
            facts = FactSet(parse_fact(line).replace(provenance=i) for i, line in enumerate(lines) if line.strip())
        except ParseError as exc:
            raise ValueError(f"bad fact: {exc}") from None
    query = obj.get("query")
    return EvalRecord(
        id=str(obj["id"]),
        question=str(obj["question"]),
        context=_as_context(obj.get("context", "")),
        gold_answers=tuple(_as_answers(obj["answers"])),
        dataset=obj.get("dataset") or default_dataset,
        query=parse_query(query) if query else None,
        facts=facts,
    )


def _timeqa(obj: dict, dataset: str) -> EvalRecord:
    return EvalRecord(
        id=str(_first(obj, "id", "idx")),
        question=str(obj["question"]),
        context=_as_context(_first(obj, "context", "paragraphs")),
        gold_answers=tuple(_as_answers(_first(obj, "answers", "targets"))),
        dataset=dataset,
    )


def _tempreason(obj: dict, dataset: str) -> EvalRecord:
    return EvalRecord(
        id=str(obj["id"]),
        question=str(obj["question"]),
        context=_as_context(_first(obj, "context", "fact_context", "facts")),
        gold_answers=tuple(_as_answers(_first(obj, "answers", "text_answers"))),
        dataset=dataset,
    )


ADAPTERS = {
    "canonical": lambda obj: _canonical(obj, "custom"),
    "custom": lambda obj: _canonical(obj, "custom"),
    "timeqa-easy": lambda obj: _timeqa(obj, "timeqa-easy"),
    "timeqa-hard": lambda obj: _timeqa(obj, "timeqa-hard"),
    "tempreason-l2": lambda obj: _tempreason(obj, "tempreason-l2"),
    "tempreason-l3": lambda obj: _tempreason(obj, "tempreason-l3"),
}


def read_dataset(path: str | Path, adapter: str = "canonical") -> tuple[list[EvalRecord], list[LineDiagnostic]]:
    """Parse a JSON-lines dataset, skipping malformed lines with a diagnostic each."""
    if adapter not in ADAPTERS:
        raise DatasetError(f"unknown adapter {adapter!r}; choose from {', '.join(ADAPTERS)}")
    convert = ADAPTERS[adapter]
    records: list[EvalRecord] = []
    diagnostics: list[LineDiagnostic] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                record = convert(obj)
            except json.JSONDecodeError as exc:
                diagnostics.append(LineDiagnostic(lineno, f"invalid JSON: {exc.msg}"))
                continue
            except KeyError as exc:
                diagnostics.append(LineDiagnostic(lineno, f"missing field {exc.args[0]!r}"))
                continue
            except (TypeError, ValueError) as exc:
                diagnostics.append(LineDiagnostic(lineno, str(exc)))
                continue
            if record.id in seen:
                diagnostics.append(LineDiagnostic(lineno, f"duplicate id {record.id!r}"))
                continue
            seen.add(record.id)
            records.append(record)
    return records, diagnostics


def load_dataset(path: str | Path, adapter: str = "canonical") -> list[EvalRecord]:
    records, diagnostics = read_dataset(path, adapter)
    for diag in diagnostics:
        logger.warning("%s: %s", path, diag)
    if diagnostics:
        logger.warning("%s: skipped %d malformed line(s)", path, len(diagnostics))
    if not records:
        raise EmptyDatasetError(f"{path}: no valid records")
    return records


@dataclass(frozen=True)
class Prediction:
    id: str
    prediction: str
    run: int = 0


def load_predictions(path: str | Path) -> list[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                preds.append(Prediction(str(obj["id"]), str(obj.get("prediction") or ""), int(obj.get("run", 0))))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}: line {lineno}: malformed prediction ({exc})") from None
    return preds


# -- scoring ------------------------------------------------------------------------


@dataclass(frozen=True)
class ItemScore:
    id: str
    dataset: str
    em: tuple[float, ...]
    f1: tuple[float, ...]

    @property
    def mean_em(self) -> float:
        return fmean(self.em)

    @property
    def mean_f1(self) -> float:
        return fmean(self.f1)


def score_predictions(records: Sequence[EvalRecord], predictions: Iterable[Prediction]) -> list[ItemScore]:
    """Score every (item, run) prediction against its gold answers.

    Items with no prediction at all are left out; an item missing only some
    runs scores zero on those runs.
    """
    by_id = {r.id: r for r in records}
    runs: dict[str, dict[int, str]] = defaultdict(dict)
    for p in predictions:
        if p.id not in by_id:
            raise DatasetError(f"prediction for unknown id {p.id!r}")
        runs[p.id][p.run] = p.prediction
    if not runs:
        raise AggregationError("no predictions to score")
    all_runs = sorted({r for item in runs.values() for r in item})
    scores = []
    for record in records:
        if record.id not in runs:
            logger.warning("no predictions for item %r; excluded from scores", record.id)
            continue
        preds = runs[record.id]
        missing = [r for r in all_runs if r not in preds]
        if missing:
            logger.warning("item %r has no prediction for run(s) %s; scored as 0", record.id, missing)
        texts = [preds.get(r) for r in all_runs]
        scores.append(
            ItemScore(
                record.id,
                record.dataset,
                tuple(0.0 if t is None else float(exact_match(t, record.gold_answers)) for t in texts),
                tuple(0.0 if t is None else token_f1(t, record.gold_answers) for t in texts),
            )
        )
    return scores


@dataclass(frozen=True)
class DatasetScore:
    em: float
    f1: float
    n: int


@dataclass
class ScoreReport:
    items: list[ItemScore]
    datasets: dict[str, DatasetScore]
    runs: list[dict[str, DatasetScore]]
    macro_em: float
    macro_f1: float
    per_run_macro: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        pct = lambda x: round(100 * x, 4)  # noqa: E731
        return {
            "datasets": {
                name: {"em": pct(s.em), "f1": pct(s.f1), "n": s.n} for name, s in self.datasets.items()
            },
            "macro": {"em": pct(self.macro_em), "f1": pct(self.macro_f1)},
            "runs": [
                {
                    "datasets": {name: {"em": pct(s.em), "f1": pct(s.f1)} for name, s in run.items()},
                    "macro": {"em": pct(em), "f1": pct(f1)},
                }
                for run, (em, f1) in zip(self.runs, self.per_run_macro)
            ],
            "items": [
                {"id": it.id, "dataset": it.dataset, "em": it.mean_em, "f1": it.mean_f1} for it in self.items
            ],
        }

    def render(self, label: str = "Score") -> str:
        return render_table([(label, self)])


def _dataset_order(names: Iterable[str]) -> list[str]:
    names = set(names)
    return [d for d in DATASETS if d in names] + sorted(names - set(DATASETS))


def _dataset_means(items: Sequence[ItemScore], em_of, f1_of) -> dict[str, DatasetScore]:
    groups: dict[str, list[ItemScore]] = defaultdict(list)
    for item in items:
        groups[item.dataset].append(item)
    return {
        name: DatasetScore(fmean(em_of(i) for i in groups[name]), fmean(f1_of(i) for i in groups[name]), len(groups[name]))
        for name in _dataset_order(groups)
    }


def aggregate(scores: Sequence[ItemScore]) -> ScoreReport:
    """Item = mean over runs, dataset = mean over items, macro = mean over datasets."""
    if not scores:
        raise AggregationError("nothing to aggregate")
    n_runs = {len(s.em) for s in scores} | {len(s.f1) for s in scores}
    if len(n_runs) != 1:
        raise AggregationError(f"items have differing run counts: {sorted(n_runs)}")
    (k,) = n_runs
    if k == 0:
        raise AggregationError("items have no runs")
    datasets = _dataset_means(scores, lambda i: i.mean_em, lambda i: i.mean_f1)
    runs = [_dataset_means(scores, lambda i, r=r: i.em[r], lambda i, r=r: i.f1[r]) for r in range(k)]
    return ScoreReport(
        items=list(scores),
        datasets=datasets,
        runs=runs,
        macro_em=fmean(s.em for s in datasets.values()),
        macro_f1=fmean(s.f1 for s in datasets.values()),
        per_run_macro=[(fmean(s.em for s in run.values()), fmean(s.f1 for s in run.values())) for run in runs],
    )


def render_table(rows: Sequence[tuple[str, ScoreReport]]) -> str:
    """Aligned text table: one row per setting, EM/F1 per dataset, then the macro average."""
    names = _dataset_order(n for _, report in rows for n in report.datasets)
    groups = [DISPLAY_NAMES.get(n, n) for n in names] + ["Avg"]
    label_width = max([len("Setting")] + [len(label) for label, _ in rows])
    cell = 6
    group_width = 2 * cell + 1

    header1 = "Setting".ljust(label_width) + "".join(" | " + g.center(group_width) for g in groups)
    header2 = " " * label_width + "".join(" | " + "EM".rjust(cell) + " " + "F1".rjust(cell) for _ in groups)
    lines = [header1, header2, "-" * len(header1)]
    for label, report in rows:
        cells = []
        for n in names:
            s = report.datasets.get(n)
            cells.append((s.em, s.f1) if s else None)
        cells.append((report.macro_em, report.macro_f1))
        line = label.ljust(label_width)
        for c in cells:
            if c is None:
                line += " | " + "--".rjust(cell) + " " + "--".rjust(cell)
            else:
                line += " | " + f"{100 * c[0]:.1f}".rjust(cell) + " " + f"{100 * c[1]:.1f}".rjust(cell)
        lines.append(line)
    return "\n".join(lines)
