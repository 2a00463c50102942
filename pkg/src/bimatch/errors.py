"""Exception types shared across the package."""


class BimatchError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(BimatchError, ValueError):
    """Tensor or mask contents violate a type invariant (non-finite, out of range)."""


class InvalidArgumentError(BimatchError, ValueError):
    """Arguments to an operation are inconsistent (shape or range mismatch)."""


class FormatError(BimatchError):
    """Malformed interchange file. Carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(BimatchError):
    """Semantic validation failure; may carry the full list of violations."""

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class StateError(BimatchError):
    """Pipeline state used before initialization or out of order."""


class ConfigError(BimatchError):
    """Unsatisfiable scene or pipeline configuration."""
