"""Exception hierarchy shared across the package."""


class DiscourseGenError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DiscourseGenError):
    """Invalid or incomplete configuration (unknown domain, missing env var, ...)."""


class UnknownLabelError(DiscourseGenError):
    """A role label could not be resolved against a schema."""

    def __init__(self, label: str, schema_domain: str):
        super().__init__(f"unknown role label {label!r} for schema {schema_domain!r}")
        self.label = label
        self.schema_domain = schema_domain


class EmptyInputError(DiscourseGenError):
    """Text input was empty or whitespace-only."""


class BudgetExceededError(DiscourseGenError):
    """The instruction prefix alone exceeds the token budget."""


class DataError(DiscourseGenError):
    """Malformed record or misaligned data (unit/label mismatch, bad logprobs, ...)."""


class AlignmentError(DataError):
    """Reference and generated corpora do not align by article id."""

    def __init__(self, message: str, orphans: list[str]):
        super().__init__(message)
        self.orphans = orphans


class BackboneError(DiscourseGenError):
    """Base class for backbone client failures."""


class ClientError(BackboneError):
    """Non-retriable HTTP failure; carries the response status."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class GenerationError(BackboneError):
    """Generation failed; carries the partial transcript for debugging."""

    def __init__(self, message: str, partial: list[str] | None = None, step: int | None = None):
        super().__init__(message)
        self.partial = partial if partial is not None else []
        self.step = step


class ClassificationError(DiscourseGenError):
    """A sentence could not be assigned a discourse role."""


class ProtocolError(ClassificationError):
    """A remote classifier returned a response outside the agreed protocol."""


class MetricError(DiscourseGenError):
    """Metric preconditions violated (empty corpus, mismatched bins, ...)."""


class UndefinedCorrelationError(MetricError):
    """Correlation is undefined for a constant input series."""


class JudgeParseError(DiscourseGenError):
    """No score in 1..5 could be extracted from a judge response."""

    def __init__(self, response: str):
        super().__init__("no integer score in 1..5 found in judge response")
        self.response = response
