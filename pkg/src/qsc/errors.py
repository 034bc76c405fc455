"""Exception types shared across the package."""


class QscError(Exception):
    """Base class for all qsc-specific errors."""


class FormatError(QscError):
    """A file or byte stream does not match its declared format."""


class ConsistencyError(QscError):
    """Inputs that must agree (counts, coverage, truncation) do not."""


class DimensionError(QscError, ValueError):
    """Array shapes are incompatible with the operation."""


class DomainError(QscError, ValueError):
    """A value lies outside the operation's domain."""


class NormalizationError(QscError, ValueError):
    """Dictionary columns are not unit L2 norm where required."""


class DivergenceError(QscError):
    """Iterative training produced a non-finite loss."""


class InsufficientDataError(QscError):
    """Not enough distinct nonzero candidates to draw the requested sample."""


class CapacityError(QscError):
    """Problem size exceeds a hard solver cap."""


class EmbeddingError(QscError):
    """An embedding cannot be constructed or is invalid on the target graph."""


class SolverError(QscError):
    """A solver backend failed inside a larger computation."""


class ConfigError(QscError):
    """Run configuration failed validation."""
