"""Command-line interface.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or transport failure.

Settings may come from an INI file (``--config``) with a ``[symtime]``
section; command-line flags win over the file::

    [symtime]
    endpoint = http://localhost:8000
    model = gpt-4o-mini
    api_key_env = OPENAI_API_KEY
    temperature = 0.1
    num_runs = 3
    parallelism = 4
    max_reflections = 2
    format = quadruple
    ablations = disable_reflection
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import random
import re
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from .backends import MockBackend, MockScriptError, ModelBackend, OpenAIChatBackend
from .core import FactSet, QueryKind, filter_relevant, filter_subject
from .errors import SymtimeError
from .evaluation import (
    ADAPTERS,
    EvalRecord,
    Prediction,
    aggregate,
    load_dataset,
    load_predictions,
    parse_query,
    render_table,
    score_predictions,
)
from .pipeline import VARIANT_LABELS, VARIANTS, Ablation, PipelineConfig, PipelineTrace, run_dataset
from .symbolic import answer_query
from .text import SymbolicFormat, parse_fact_block, serialize_fact

logger = logging.getLogger("symtime")

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2

DEFAULTS = {
    "endpoint": None,
    "model": "gpt-4o-mini",
    "api_key_env": "OPENAI_API_KEY",
    "temperature": 0.1,
    "num_runs": 3,
    "parallelism": 4,
    "max_reflections": 2,
    "format": "quadruple",
    "ablations": "",
    "seed": 0,
}
_CASTS = {"temperature": float, "num_runs": int, "parallelism": int, "max_reflections": int, "seed": int}


class UsageError(SymtimeError):
    pass


def _setting(args: argparse.Namespace, file_cfg: dict, key: str):
    value = getattr(args, key, None)
    if value is None:
        value = file_cfg.get(key, DEFAULTS[key])
    if value is not None and key in _CASTS:
        try:
            value = _CASTS[key](value)
        except ValueError:
            raise UsageError(f"{key}: expected {_CASTS[key].__name__}, got {value!r}") from None
    return value


def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("symtime"):
        return {}
    unknown = set(parser["symtime"]) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"{path}: unknown setting(s): {', '.join(sorted(unknown))}")
    return dict(parser["symtime"])


def _pipeline_config(args: argparse.Namespace, file_cfg: dict, variant: Optional[str] = None) -> PipelineConfig:
    common = dict(
        max_reflections=_setting(args, file_cfg, "max_reflections"),
        format=SymbolicFormat(_setting(args, file_cfg, "format")),
        temperature=_setting(args, file_cfg, "temperature"),
        num_runs=_setting(args, file_cfg, "num_runs"),
        auto_repair=not getattr(args, "no_auto_repair", False),
    )
    try:
        if variant is not None:
            return PipelineConfig.variant(variant, **common)
        flags = args.ablation if args.ablation is not None else _split(file_cfg.get("ablations", ""))
        ablations = frozenset(Ablation(f) for f in flags)
        if Ablation.DISABLE_REFLECTION in ablations:
            common["max_reflections"] = 0
        return PipelineConfig(ablations=ablations, **common)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _split(value: str) -> list[str]:
    return [v for v in re.split(r"[\s,]+", value) if v]


def _backend(args: argparse.Namespace, file_cfg: dict) -> ModelBackend:
    if args.mock:
        return MockBackend.from_file(args.mock)
    endpoint = _setting(args, file_cfg, "endpoint")
    if not endpoint:
        raise UsageError("a backend is required: pass --mock SCRIPT or --endpoint URL")
    return OpenAIChatBackend(endpoint, _setting(args, file_cfg, "model"), _setting(args, file_cfg, "api_key_env"))


class _NoBackend:
    """Stands in when the symbolic-only variant needs no model."""

    def complete(self, request):
        raise MockScriptError("symbolic-only runs must not call a backend")


def _safe_name(item_id: str) -> str:
    return re.sub(r"[^\w.-]", "_", item_id) or "_"


# -- subcommands ----------------------------------------------------------------------


def cmd_parse(args: argparse.Namespace, file_cfg: dict) -> int:
    text = Path(args.facts).read_text(encoding="utf-8")
    facts, diagnostics = parse_fact_block(text)
    fmt = SymbolicFormat(_setting(args, file_cfg, "format"))
    for fact in facts:
        print(serialize_fact(fact, fmt))
    for d in diagnostics:
        print(f"{args.facts}: {d}", file=sys.stderr)
    return EXIT_FAIL if any(d.severity == "error" for d in diagnostics) else EXIT_OK


def cmd_query(args: argparse.Namespace, file_cfg: dict) -> int:
    text = Path(args.facts).read_text(encoding="utf-8")
    facts, diagnostics = parse_fact_block(text)
    for d in diagnostics:
        print(f"{args.facts}: {d}", file=sys.stderr)
    spec = {"kind": args.kind, "subject": args.subject, "relation": args.relation,
            "from": getattr(args, "from"), "to": args.to, "reference": args.ref}
    if spec["kind"] in (None, "overlap") and spec["from"] is None and spec["to"] is None:
        spec.update(kind="overlap", **{"from": "-inf", "to": "+inf"})
    try:
        query = parse_query(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fmt = SymbolicFormat(_setting(args, file_cfg, "format"))

    if query.kind is QueryKind.OVERLAP:
        pool = filter_subject(facts, query.subject) if query.subject else facts
        if query.relation:
            pool = FactSet(f for f in pool if f.relation == query.relation)
        matches = filter_relevant(pool, query.interval)
        for fact in matches:
            print(serialize_fact(fact, fmt))
        return EXIT_OK if matches else EXIT_FAIL

    result = answer_query(facts, query)
    if not result.answer:
        print(f"no answer: {result.note}", file=sys.stderr)
        return EXIT_FAIL
    print(result.answer)
    return EXIT_OK


def _load(args: argparse.Namespace) -> list[EvalRecord]:
    return load_dataset(args.dataset, args.adapter)


def _write_traces(directory: Path, traces: Sequence[PipelineTrace]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for trace in traces:
        path = directory / f"{_safe_name(trace.item_id)}__run{trace.run}.json"
        path.write_text(trace.to_json() + "\n", encoding="utf-8")


def _failure_code(traces: Sequence[PipelineTrace]) -> int:
    errors = [t.error for t in traces if t.error]
    if not errors:
        return EXIT_OK
    return EXIT_FAIL if all(e.startswith("extraction error") for e in errors) else EXIT_IO


def _score_table(records: Sequence[EvalRecord], predictions: Sequence[Prediction]):
    scored = [p for p in predictions if p.id in {r.id for r in records}]
    if not scored:
        return None
    return aggregate(score_predictions(records, scored))


def cmd_run(args: argparse.Namespace, file_cfg: dict) -> int:
    records = _load(args)
    config = _pipeline_config(args, file_cfg)
    backend = _NoBackend() if config.symbolic_only and not args.mock else _backend(args, file_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    predictions_path = out / "predictions.jsonl"
    checkpoint_path = out / "checkpoint.txt"
    if args.fresh:
        for path in (predictions_path, checkpoint_path):
            path.unlink(missing_ok=True)
    done = set(checkpoint_path.read_text(encoding="utf-8").split("\n")) - {""} if checkpoint_path.exists() else set()
    pending = [r for r in records if r.id not in done]
    if done:
        logger.info("resuming: %d item(s) already checkpointed, %d to run", len(records) - len(pending), len(pending))

    lock = threading.Lock()
    all_traces: list[PipelineTrace] = []

    def record(item: EvalRecord, traces: list[PipelineTrace]) -> None:
        with lock:
            _write_traces(out / "traces", traces)
            with open(predictions_path, "a", encoding="utf-8") as fh:
                for t in traces:
                    if t.error is None:
                        fh.write(json.dumps({"id": t.item_id, "run": t.run, "prediction": t.final_answer},
                                            ensure_ascii=False) + "\n")
            with open(checkpoint_path, "a", encoding="utf-8") as fh:
                fh.write(item.id + "\n")
            all_traces.extend(traces)

    run_dataset(pending, backend, config, parallelism=_setting(args, file_cfg, "parallelism"), on_item=record)

    failures = [t for t in all_traces if t.error]
    answered = sum(1 for t in all_traces if t.final_answer is not None)
    summary = {
        "items": len(records),
        "skipped": len(records) - len(pending),
        "runs": len(all_traces),
        "answers_parsed": answered,
        "failures": [{"id": t.item_id, "run": t.run, "error": t.error} for t in failures],
        "config": config.to_dict(),
        "seed": _setting(args, file_cfg, "seed"),
    }
    predictions = load_predictions(predictions_path) if predictions_path.exists() else []
    report = _score_table(records, predictions) if predictions else None
    if report is not None:
        summary["scores"] = report.to_dict()
    (out / "report.json").write_text(json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    print(f"items: {len(records)}  skipped: {summary['skipped']}  runs: {len(all_traces)}  "
          f"answers parsed: {answered}  failures: {len(failures)}")
    for f in summary["failures"]:
        print(f"failed: {f['id']} run {f['run']}: {f['error']}", file=sys.stderr)
    if report is not None:
        print(report.render("Pipeline"))
    return _failure_code(all_traces)


def cmd_eval(args: argparse.Namespace, file_cfg: dict) -> int:
    records = _load(args)
    predictions = load_predictions(args.predictions)
    report = aggregate(score_predictions(records, predictions))
    print(report.render(args.label))
    target = Path(args.json) if args.json else Path(args.predictions).with_name("scores.json")
    target.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, file_cfg: dict) -> int:
    records = _load(args)
    backend: Optional[ModelBackend] = None
    rows, summary, all_traces = [], {}, []
    for name in VARIANTS:
        config = _pipeline_config(args, file_cfg, variant=name)
        if config.symbolic_only:
            model: ModelBackend = _NoBackend()
        else:
            backend = backend or _backend(args, file_cfg)
            model = backend
        results = run_dataset(records, model, config, parallelism=_setting(args, file_cfg, "parallelism"))
        traces = [t for ts in results.values() for t in ts]
        all_traces.extend(traces)
        if args.out:
            _write_traces(Path(args.out) / name, traces)
        predictions = [Prediction(t.item_id, t.final_answer or "", t.run) for t in traces if t.error is None]
        report = _score_table(records, predictions)
        if report is None:
            logger.error("variant %s produced no predictions", name)
            continue
        rows.append((VARIANT_LABELS[name], report))
        summary[name] = report.to_dict()
    print(render_table(rows))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "ablation.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return _failure_code(all_traces)


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI settings file with a [symtime] section")
    common.add_argument("--seed", type=int, default=None, help="reserved for randomized tie-breaking")
    common.add_argument("--format", choices=[f.value for f in SymbolicFormat], default=None,
                        help="fact serialization format")
    common.add_argument("-v", "--verbose", action="count", default=0)

    backend = argparse.ArgumentParser(add_help=False)
    backend.add_argument("dataset", help="JSONL dataset")
    backend.add_argument("--adapter", choices=sorted(ADAPTERS), default="canonical")
    backend.add_argument("--mock", help="JSONL mock script instead of a live endpoint")
    backend.add_argument("--endpoint")
    backend.add_argument("--model")
    backend.add_argument("--api-key-env", dest="api_key_env")
    backend.add_argument("--temperature", type=float)
    backend.add_argument("--num-runs", dest="num_runs", type=int)
    backend.add_argument("--parallelism", type=int)
    backend.add_argument("--max-reflections", dest="max_reflections", type=int)
    backend.add_argument("--no-auto-repair", action="store_true",
                         help="leave the facts untouched before reflection prompts")

    parser = argparse.ArgumentParser(prog="symtime", description="Neuro-symbolic temporal question answering.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse a fact file and print canonical facts")
    p.add_argument("facts")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("query", parents=[common], help="answer a query from a fact file")
    p.add_argument("facts")
    p.add_argument("--kind", choices=[k.value for k in QueryKind])
    p.add_argument("--subject")
    p.add_argument("--relation")
    p.add_argument("--from", dest="from")
    p.add_argument("--to")
    p.add_argument("--ref")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("run", parents=[common, backend], help="run the pipeline over a dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ablation", action="append", choices=[a.value for a in Ablation], default=None)
    p.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", parents=[common], help="score predictions against a dataset")
    p.add_argument("dataset")
    p.add_argument("predictions")
    p.add_argument("--adapter", choices=sorted(ADAPTERS), default="canonical")
    p.add_argument("--json", help="where to write the JSON summary (default: scores.json beside predictions)")
    p.add_argument("--label", default="Pipeline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common, backend], help="score every ablation variant")
    p.add_argument("--out", help="directory for per-variant traces")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        file_cfg = _read_config(args.config)
        random.seed(_setting(args, file_cfg, "seed"))
        return args.func(args, file_cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MockScriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SymtimeError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
