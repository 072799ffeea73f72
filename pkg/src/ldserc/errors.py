"""Exception hierarchy shared by every module of the package."""


class LDSercError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LDSercError, ValueError):
    """Malformed arguments: wrong shapes, non-finite entries, bad lengths."""


class DomainError(LDSercError, ArithmeticError):
    """An elemental was evaluated outside its (smooth) domain."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{message} (at {path})"
        super().__init__(message)


class PreconditionError(LDSercError, ValueError):
    """A documented precondition of an operation does not hold."""


class ModelError(LDSercError, ValueError):
    """A model document or ModelSpec violates the schema."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class IntegrationError(LDSercError, RuntimeError):
    """Numerical integration failed at time ``t``."""

    def __init__(self, message, t=None):
        self.t = t
        if t is not None:
            message = f"{message} (t={t:.6g})"
        super().__init__(message)


class DivergenceError(IntegrationError):
    """The state became non-finite during integration."""
