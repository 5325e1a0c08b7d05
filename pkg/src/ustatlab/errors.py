"""Exception hierarchy shared by all ustatlab modules."""


class UStatError(Exception):
    """Base class for all ustatlab errors."""


class InvalidArgumentError(UStatError, ValueError):
    """Malformed argument (wrong arity, bad parameter, unknown registry name)."""


class DomainError(UStatError, ValueError):
    """Input outside the mathematical domain (non-finite values, etc.)."""


class UnsupportedOperationError(UStatError):
    """The requested computation has no available route for these inputs."""


class InsufficientDataError(UStatError, ValueError):
    """Sample too small for the requested statistic (n < m and friends)."""


class ResourceLimitError(UStatError):
    """Exact enumeration would exceed the configured work ceiling."""


class DegenerateNormalizerError(UStatError, ArithmeticError):
    """A self-normalizing denominator is zero (constant data / kernel)."""


class PreconditionViolationError(UStatError, ValueError):
    """A checked mathematical precondition (e.g. degeneracy) does not hold."""


class ConfigError(UStatError, ValueError):
    """Invalid experiment or CLI configuration."""
