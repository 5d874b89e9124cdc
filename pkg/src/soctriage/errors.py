"""Exception hierarchy shared across the triage engine."""


class SocTriageError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SocTriageError):
    """Caller violated a documented precondition or passed bad arguments."""


class ParseError(SocTriageError):
    """A raw record could not be parsed."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        super().__init__(message)
        self.line = line
        self.offset = offset


class SchemaError(SocTriageError):
    """A record parsed but is missing required fields or has bad types."""


class EmptyCorpusError(SocTriageError):
    """An operation that requires at least one event got none."""


class DegenerateLabelError(SocTriageError):
    """Labels are constant (or a class has too few examples) where variation is required."""


class ConfigError(SocTriageError):
    """A config or data file violates its schema or invariants."""


class DataIntegrityError(SocTriageError):
    """Cross-referenced stores disagree (e.g. metadata points at a missing query)."""


class DataLeakageError(SocTriageError):
    """A test-set item was found inside a training/history index."""


class ProviderError(SocTriageError):
    """Base class for language-model provider failures."""


class TransportError(ProviderError):
    """Retryable transport failure (timeout, connection reset, 5xx)."""


class AuthError(ProviderError):
    """Non-retryable authentication/authorization failure."""


class PromptTooLargeError(ProviderError):
    """Rendered prompt exceeds the provider's size limit; no network attempt is made."""


class UnparseableVerdictError(SocTriageError):
    """Completion text carried no recognizable verdict token."""


class NoQuorumError(SocTriageError):
    """All ensemble members abstained; no decision can be made."""


class ExtractionError(SocTriageError):
    """Deterministic query extraction produced an empty result."""

    def __init__(self, message: str, raw_completion: str = ""):
        super().__init__(message)
        self.raw_completion = raw_completion


class GenerationError(SocTriageError):
    """Query generation failed (provider exhaustion or extraction failure)."""

    def __init__(self, message: str, raw_completion: str = ""):
        super().__init__(message)
        self.raw_completion = raw_completion


class ClassificationError(SocTriageError):
    """Resolution output stayed unparseable after the repair round."""


class InvalidCodeError(SocTriageError):
    """Model produced a resolution code outside the closed 7-value set."""


class EvidenceRejectedError(SocTriageError):
    """A query that failed validation was offered as evidence."""
