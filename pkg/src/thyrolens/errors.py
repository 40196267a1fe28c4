"""Exception types shared across the package."""


class ThyrolensError(Exception):
    """Base class for all domain errors raised by this package."""


class SchemaError(ThyrolensError):
    """A schema document is malformed or incomplete."""


class RecordError(ThyrolensError):
    """A record violates the feature system (wrong arity, kind or bounds)."""


class IngestError(ThyrolensError):
    """A dataset file cannot be read or parsed."""


class SchemaMismatchError(ThyrolensError):
    """Model and data were built against different feature systems."""


class ModelFormatError(ThyrolensError):
    """A model artifact is corrupt, truncated or has an unknown version."""


class RequestValidationError(ThyrolensError):
    """A hypothesis request failed validation.

    Carries a stable machine-readable ``code`` so HTTP and CLI layers can
    report the same error identity.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class RecordNotFoundError(RequestValidationError):
    def __init__(self, record_id: str):
        super().__init__("record_not_found", f"record not found: {record_id}")
        self.record_id = record_id
