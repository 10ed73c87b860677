"""Exception types shared across the pipeline."""

from __future__ import annotations


class IndikgError(Exception):
    """Base class for all package errors."""


class ConfigError(IndikgError):
    """Invalid configuration value or file."""


class EncodingError(IndikgError):
    """Source bytes do not decode as UTF-8."""


class EmptyDocumentError(IndikgError):
    """Document body is empty after decoding."""


class ParseError(IndikgError):
    """A reference-range expression could not be parsed.

    Carries the byte offset of the failure and the set of token kinds
    that would have been accepted there.
    """

    def __init__(self, message: str, offset: int = 0, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.offset = offset
        self.expected = expected


class UnitError(IndikgError):
    """Units are incompatible or unknown with no conversion available."""


class ClassificationError(IndikgError):
    """classify() precondition violated (context selects more than one stratum)."""


class SchemaError(IndikgError):
    """Ontology schema failed structural validation (dangling name, cycle, ...)."""


class VocabLookupError(IndikgError):
    """External vocabulary lookup file could not be read."""


class DuplicateError(IndikgError):
    """Chunk id already present in the index."""


class DimensionError(IndikgError):
    """Vector dimension does not match the index configuration."""


class ZeroVectorError(IndikgError):
    """Zero vectors cannot be indexed."""


class EmptyIndexError(IndikgError):
    """Search requested against an index with no entries."""


class ProviderError(IndikgError):
    """Model provider call failed.

    ``retryable`` hints whether the caller may retry; ``batch`` carries the
    failed ExtractionBatch when the failure happened mid-extraction.
    """

    def __init__(self, message: str, retryable: bool = False, batch=None):
        super().__init__(message)
        self.retryable = retryable
        self.batch = batch


class PromptBudgetError(IndikgError):
    """Prompt exceeds the configured token budget."""

    def __init__(self, message: str, overflow: int):
        super().__init__(message)
        self.overflow = overflow


class IntegrityError(IndikgError):
    """Graph referential integrity violated (dangling endpoint, missing node)."""


class GraphImportError(IndikgError):
    """Graph file malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class StateError(IndikgError):
    """Operation not valid for the item's current state."""


class ReviewConflictError(IndikgError):
    """Optimistic-concurrency version mismatch: another reviewer acted first."""


class NotFoundError(IndikgError):
    """Referenced item, template, or entity does not exist."""


class NoContextError(IndikgError):
    """Question produced no graph seeds and no retrieval hits."""


class UngroundedAnswerError(IndikgError):
    """Generative answer mentions entities not present in the context bundle."""

    def __init__(self, message: str, mentions: tuple[str, ...]):
        super().__init__(message)
        self.mentions = mentions
