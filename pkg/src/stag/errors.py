"""Exception types shared across pipeline stages and the API service."""


class StagError(Exception):
    """Base class for all package-specific errors."""


class RecordError(StagError):
    """A single input record is malformed or violates an invariant."""


class ConfigError(StagError):
    """Pipeline configuration is missing or inconsistent."""


class TrainingError(StagError):
    """A model cannot be trained from the supplied data."""


class IntegrityError(StagError):
    """A graph reference does not resolve or an index invariant is broken."""


class CorruptSnapshotError(StagError):
    """A snapshot directory fails digest or manifest validation."""


class BadIdentifierError(StagError):
    """An identifier string is syntactically invalid (distinct from not-found)."""


class NotFoundError(StagError):
    """A referenced record does not exist."""


class BadRequestError(StagError):
    """A service or module request is semantically invalid."""


class NotScorableError(StagError):
    """A score is undefined for the given inputs (e.g. reviewer with no papers)."""
