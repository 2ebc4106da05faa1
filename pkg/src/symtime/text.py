"""Text forms of temporal facts and the tagged stage protocol.

Three fact serializations are supported::

    quadruple   works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)
    fol         holds(works_for, Jaroslav Pelikan, Valparaiso University, 1946, 1949)
    dict        {relation: works_for, subject: Jaroslav Pelikan, object: Valparaiso University, start: 1946, end: 1949}

Entity names containing any of ``, ( ) " { } : \\`` (or starting with a quote
character) are written in double quotes, with ``\\"``, ``\\\\``, ``\\n`` and ``\\r``
escapes. Single-quoted values are accepted on input.
"""

from __future__ import annotations

import enum
import logging
import re
import string
from dataclasses import dataclass
from typing import Optional

from .core import FactSet, TemporalFact, is_identifier
from .errors import MissingAnswerError, ParseError, TimestampParseError
from .timepoints import NEG_INF, POS_INF, Side, TimeInterval, TimePoint, format_timepoint

logger = logging.getLogger(__name__)


class SymbolicFormat(str, enum.Enum):
    QUADRUPLE = "quadruple"
    FOL = "fol"
    DICT = "dict"


class Stage(str, enum.Enum):
    REPRESENTATION = "representation"
    INFERENCE = "inference"
    CONSISTENCY_CHECK = "consistency_check"
    REFLECTION = "reflection"
    ANSWER = "answer"


STAGE_ORDER = {stage: rank for rank, stage in enumerate(Stage)}


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "warning" | "error"
    message: str
    span: tuple[int, int]

    def to_dict(self) -> dict:
        return {"severity": self.severity, "message": self.message, "span": list(self.span)}

    def __str__(self) -> str:
        return f"{self.severity} at {self.span[0]}-{self.span[1]}: {self.message}"


@dataclass(frozen=True)
class StageBlock:
    stage: Stage
    body: str
    index: int
    span: tuple[int, int] = (0, 0)
    closed: bool = True

    def to_dict(self) -> dict:
        return {"stage": self.stage.value, "index": self.index, "body": self.body, "closed": self.closed}


# -- timestamps --------------------------------------------------------------

_MONTHS = {
    name: number
    for number, names in enumerate(
        [
            ("january", "jan"),
            ("february", "feb"),
            ("march", "mar"),
            ("april", "apr"),
            ("may",),
            ("june", "jun"),
            ("july", "jul"),
            ("august", "aug"),
            ("september", "sep", "sept"),
            ("october", "oct"),
            ("november", "nov"),
            ("december", "dec"),
        ],
        start=1,
    )
    for name in names
}

_ISO = re.compile(r"(-?\d{1,4})(?:-(\d{1,2})(?:-(\d{1,2}))?)?\Z")
_DAY_MONTH_YEAR = re.compile(r"(?:(\d{1,2})\s+)?([A-Za-z]+)\.?,?\s+(-?\d{1,4})\Z")
_MONTH_DAY_YEAR = re.compile(r"([A-Za-z]+)\.?\s+(\d{1,2}),?\s+(-?\d{1,4})\Z")


def normalize_timestamp(text: str, side: Optional[Side] = None, offset: int = 0) -> TimePoint:
    """Parse a timestamp string, keeping the granularity it was written at.

    ``unknown`` maps to negative infinity on the start side and positive
    infinity on the end side, so ``side`` is required for it. ``present``
    always maps to positive infinity.
    """
    stripped = text.strip()
    lead = len(text) - len(text.lstrip())
    span = (offset + lead, offset + lead + len(stripped))

    def fail(message: str) -> TimestampParseError:
        return TimestampParseError(ParseDiagnostic("error", message, span))

    if not stripped:
        raise fail("empty timestamp")
    lowered = stripped.lower()
    if lowered == "present":
        return POS_INF
    if lowered in ("+inf", "inf"):
        return POS_INF
    if lowered == "-inf":
        return NEG_INF
    if lowered == "unknown":
        if side is None:
            raise fail("'unknown' needs a start/end side to resolve")
        return NEG_INF if side == "start" else POS_INF

    try:
        m = _ISO.match(stripped)
        if m:
            year, month, day = m.groups()
            return TimePoint(int(year), int(month) if month else None, int(day) if day else None)
        m = _DAY_MONTH_YEAR.match(stripped)
        if m and m.group(2).lower() in _MONTHS:
            day, name, year = m.groups()
            return TimePoint(int(year), _MONTHS[name.lower()], int(day) if day else None)
        m = _MONTH_DAY_YEAR.match(stripped)
        if m and m.group(1).lower() in _MONTHS:
            name, day, year = m.groups()
            return TimePoint(int(year), _MONTHS[name.lower()], int(day))
    except ValueError as exc:
        raise fail(f"invalid date {stripped!r}: {exc}") from None
    raise fail(f"unrecognised timestamp {stripped!r}")


# -- predicates ----------------------------------------------------------------

_SPECIAL = set(',()"{}:\\')
_ESCAPES = {"n": "\n", "r": "\r", "t": "\t", '"': '"', "'": "'", "\\": "\\"}


def quote_entity(value: str) -> str:
    if not (any(ch in _SPECIAL or ch in "\n\r" for ch in value) or value[0] in "'\""):
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\r", "\\r")
    return f'"{escaped}"'


def serialize_fact(fact: TemporalFact, fmt: SymbolicFormat | str = SymbolicFormat.QUADRUPLE) -> str:
    fmt = SymbolicFormat(fmt)
    subject, obj = quote_entity(fact.subject), quote_entity(fact.object)
    start = format_timepoint(fact.start, "start")
    end = format_timepoint(fact.end, "end")
    if fmt is SymbolicFormat.QUADRUPLE:
        return f"{fact.relation}({subject}, {obj}, {start}, {end})"
    if fmt is SymbolicFormat.FOL:
        return f"holds({fact.relation}, {subject}, {obj}, {start}, {end})"
    return f"{{relation: {fact.relation}, subject: {subject}, object: {obj}, start: {start}, end: {end}}}"


def serialize_facts(facts, fmt: SymbolicFormat | str = SymbolicFormat.QUADRUPLE) -> str:
    return "\n".join(serialize_fact(f, fmt) for f in facts)


@dataclass
class _Arg:
    value: str
    start: int
    end: int
    quoted: bool


class _Scanner:
    """Recursive-descent reader over one predicate in ``text[pos:]``."""

    def __init__(self, text: str, pos: int = 0, base: int = 0):
        self.text = text
        self.pos = pos
        self.base = base  # added to every reported span

    def error(self, message: str, start: int, end: Optional[int] = None) -> ParseError:
        end = start + 1 if end is None else end
        end = min(max(end, start), len(self.text))
        start = min(start, len(self.text))
        return ParseError(ParseDiagnostic("error", message, (self.base + start, self.base + end)))

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r":
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise self.error(f"expected {ch!r}, found {found}", self.pos)
        self.pos += 1

    def identifier(self) -> tuple[str, int, int]:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isascii() and (self.text[self.pos].isalnum() or self.text[self.pos] == "_")):
            self.pos += 1
        name = self.text[start : self.pos]
        if not is_identifier(name):
            raise self.error(f"expected an identifier, found {name or self.peek()!r}", start, max(self.pos, start + 1))
        return name, start, self.pos

    def value(self, stops: str) -> _Arg:
        """Read one argument ending just before a character in ``stops``."""
        self.skip_ws()
        start = self.pos
        ch = self.peek()
        if ch in ("'", '"'):
            return self._quoted(ch)
        while self.pos < len(self.text) and self.text[self.pos] not in stops:
            c = self.text[self.pos]
            if c in '()"{}\n':
                raise self.error(f"unexpected {c!r} in unquoted argument; quote the value", self.pos)
            self.pos += 1
        raw = self.text[start : self.pos]
        stripped = raw.strip()
        lead = len(raw) - len(raw.lstrip())
        return _Arg(stripped, start + lead, start + lead + len(stripped), False)

    def _quoted(self, quote: str) -> _Arg:
        start = self.pos
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.text) or self.text[self.pos] == "\n":
                raise self.error("unterminated quoted argument", start, self.pos)
            c = self.text[self.pos]
            if c == "\\" and self.pos + 1 < len(self.text):
                nxt = self.text[self.pos + 1]
                out.append(_ESCAPES.get(nxt, "\\" + nxt))
                self.pos += 2
                continue
            if c == quote:
                self.pos += 1
                break
            out.append(c)
            self.pos += 1
        end = self.pos
        self.skip_ws()
        return _Arg("".join(out), start, end, True)

    def arguments(self, close: str) -> list[_Arg]:
        args = []
        self.skip_ws()
        if self.peek() == close:
            self.pos += 1
            return args
        while True:
            args.append(self.value("," + close))
            self.skip_ws()
            c = self.peek()
            if c == ",":
                self.pos += 1
                continue
            if c == close:
                self.pos += 1
                return args
            raise self.error(f"expected ',' or {close!r}", self.pos)


def _build_fact(scanner: _Scanner, relation: str, args: list[_Arg], span: tuple[int, int]) -> TemporalFact:
    subject, obj, start, end = args
    for arg, what in ((subject, "subject"), (obj, "object")):
        if not arg.value.strip():
            raise scanner.error(f"empty {what}", arg.start, arg.end)
    ts = normalize_timestamp(start.value, "start", offset=scanner.base + start.start)
    te = normalize_timestamp(end.value, "end", offset=scanner.base + end.start)
    try:
        return TemporalFact(relation, subject.value, obj.value, TimeInterval(ts, te))
    except ValueError as exc:
        raise scanner.error(str(exc), *span) from None


def _read_predicate(scanner: _Scanner) -> TemporalFact:
    scanner.skip_ws()
    begin = scanner.pos
    if scanner.peek() == "{":
        scanner.pos += 1
        return _read_dict(scanner, begin)
    name, name_start, name_end = scanner.identifier()
    scanner.expect("(")
    args = scanner.arguments(")")
    span = (begin, scanner.pos)
    if name == "holds" and len(args) == 5:
        rel = args[0]
        if rel.quoted or not is_identifier(rel.value):
            raise scanner.error(f"relation is not an identifier: {rel.value!r}", rel.start, rel.end)
        return _build_fact(scanner, rel.value, args[1:], span)
    if len(args) != 4:
        raise scanner.error(
            f"{name} expects 4 arguments (subject, object, start, end), got {len(args)}", *span
        )
    return _build_fact(scanner, name, args, span)


_DICT_KEYS = ("relation", "subject", "object", "start", "end")


def _read_dict(scanner: _Scanner, begin: int) -> TemporalFact:
    fields: dict[str, _Arg] = {}
    scanner.skip_ws()
    if scanner.peek() == "}":
        raise scanner.error("empty record", begin, scanner.pos + 1)
    while True:
        key = scanner.value(":,}")
        if key.value not in _DICT_KEYS:
            raise scanner.error(f"unknown record key {key.value!r}", key.start, max(key.end, key.start + 1))
        if key.value in fields:
            raise scanner.error(f"duplicate record key {key.value!r}", key.start, key.end)
        scanner.expect(":")
        fields[key.value] = scanner.value(",}")
        scanner.skip_ws()
        c = scanner.peek()
        scanner.pos += 1
        if c == "}":
            break
        if c != ",":
            raise scanner.error("expected ',' or '}'", scanner.pos - 1)
    span = (begin, scanner.pos)
    missing = [k for k in _DICT_KEYS if k not in fields]
    if missing:
        raise scanner.error(f"record missing keys: {', '.join(missing)}", *span)
    rel = fields["relation"]
    if not is_identifier(rel.value):
        raise scanner.error(f"relation is not an identifier: {rel.value!r}", rel.start, rel.end)
    return _build_fact(scanner, rel.value, [fields[k] for k in _DICT_KEYS[1:]], span)


def parse_fact(text: str, offset: int = 0) -> TemporalFact:
    """Parse one predicate in any of the three formats; trailing text is an error.

    ``offset`` is added to diagnostic spans, for callers parsing a slice of a
    larger document.
    """
    # surrounding whitespace, newlines included, is not part of the predicate
    scanner = _Scanner(text, len(text) - len(text.lstrip()), offset)
    fact = _read_predicate(scanner)
    end = len(text.rstrip())
    if scanner.pos < end:
        raise scanner.error("unexpected text after predicate", scanner.pos, end)
    return fact


def parse_fact_at(text: str, pos: int) -> tuple[TemporalFact, int]:
    """Parse a predicate starting at ``pos``; return it with the end offset."""
    scanner = _Scanner(text, pos)
    fact = _read_predicate(scanner)
    return fact, scanner.pos


def parse_fact_block(text: str) -> tuple[FactSet, list[ParseDiagnostic]]:
    """One predicate per line; blank and ``#`` lines are skipped.

    Failing lines become error diagnostics whose spans index into ``text``.
    Each fact's provenance is its 0-based line number.
    """
    facts = []
    diagnostics = []
    offset = 0
    for lineno, line in enumerate(text.split("\n")):
        content = line.rstrip("\r")
        stripped = content.strip()
        if stripped and not stripped.startswith("#"):
            try:
                fact = parse_fact(content, offset)
            except ParseError as exc:
                diagnostics.append(exc.diagnostic)
            else:
                facts.append(fact.replace(provenance=lineno))
        offset += len(line) + 1
    return FactSet(facts), diagnostics


_PREDICATE_START = re.compile(r"[A-Za-z][A-Za-z0-9_]*\s*\(|\{")


def scan_predicates(text: str) -> list[tuple[TemporalFact, tuple[int, int]]]:
    """Find every well-formed predicate embedded in free text, in order."""
    found = []
    pos = 0
    while True:
        m = _PREDICATE_START.search(text, pos)
        if m is None:
            return found
        # only a word boundary may start a predicate
        if m.start() > 0 and (text[m.start() - 1].isalnum() or text[m.start() - 1] == "_"):
            pos = m.start() + 1
            continue
        try:
            fact, end = parse_fact_at(text, m.start())
        except ParseError:
            pos = m.start() + 1
            continue
        found.append((fact, (m.start(), end)))
        pos = end


# -- tagged stage output ----------------------------------------------------------


# ASCII-only lowering keeps offsets aligned with the source
_ASCII_LOWER = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)


def scan_tagged_output(text: str) -> tuple[list[StageBlock], list[ParseDiagnostic]]:
    """Extract tagged stage blocks in document order without raising.

    Tags are matched case-insensitively. A block with no closing tag runs to
    the next opening stage tag or to the end of the text, with a warning.
    Text outside blocks is ignored; tags nested inside a closed block stay
    part of its body.
    """
    lowered = text.translate(_ASCII_LOWER)
    opens = {stage: f"<{stage.value}>" for stage in Stage}
    blocks: list[StageBlock] = []
    diagnostics: list[ParseDiagnostic] = []
    pos = 0

    def next_open(start: int) -> tuple[int, Optional[Stage]]:
        best, best_stage = -1, None
        for stage, tag in opens.items():
            i = lowered.find(tag, start)
            if i != -1 and (best == -1 or i < best):
                best, best_stage = i, stage
        return best, best_stage

    while True:
        at, stage = next_open(pos)
        if stage is None:
            break
        body_start = at + len(opens[stage])
        close_tag = f"</{stage.value}>"
        close = lowered.find(close_tag, body_start)
        if close != -1:
            body_end, pos, closed = close, close + len(close_tag), True
        else:
            following, _ = next_open(body_start)
            body_end = following if following != -1 else len(text)
            pos, closed = body_end, False
            diagnostics.append(
                ParseDiagnostic("warning", f"unclosed <{stage.value}> tag", (at, body_start))
            )
            logger.warning("unclosed <%s> tag at offset %d", stage.value, at)
        blocks.append(StageBlock(stage, text[body_start:body_end], len(blocks), (body_start, body_end), closed))
    return blocks, diagnostics


def parse_tagged_output(text: str) -> list[StageBlock]:
    blocks, _ = scan_tagged_output(text)
    if not any(b.stage is Stage.ANSWER for b in blocks):
        raise MissingAnswerError("no <answer> block in model output")
    return blocks


def first_block(text: str, stage: Stage) -> Optional[StageBlock]:
    blocks, _ = scan_tagged_output(text)
    for block in blocks:
        if block.stage is stage:
            return block
    return None
