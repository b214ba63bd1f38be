"""Exception hierarchy shared by all modules."""


class ChdynError(Exception):
    """Base class for errors raised by chdyn."""


class ConfigError(ChdynError, ValueError):
    """A configuration key is missing, unknown or out of range."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class PreconditionError(ChdynError, ValueError):
    """Input violates a mathematical precondition (domain, mean, interiority)."""


class DomainError(PreconditionError):
    """A point lies outside the domain of a monotone graph."""


class NumericalFailure(ChdynError, RuntimeError):
    """A nonlinear or linear solve failed after all retries."""
