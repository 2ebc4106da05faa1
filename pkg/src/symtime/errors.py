from __future__ import annotations


class SymtimeError(Exception):
    """Base class for errors raised by this package."""


class ReferenceNotFoundError(SymtimeError, LookupError):
    def __init__(self, reference: str):
        super().__init__(f"reference object not found among facts: {reference!r}")
        self.reference = reference


class ParseError(SymtimeError, ValueError):
    """Raised with a :class:`symtime.text.ParseDiagnostic` attached."""

    def __init__(self, diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


class TimestampParseError(ParseError):
    pass


class MissingAnswerError(SymtimeError):
    pass


class SequencingError(SymtimeError):
    pass


class BackendError(SymtimeError):
    """Transport-level failure talking to a model backend; retryable."""


class PipelineError(SymtimeError):
    pass


class PreconditionError(SymtimeError, ValueError):
    pass


class DatasetError(SymtimeError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class AggregationError(SymtimeError, ValueError):
    pass
