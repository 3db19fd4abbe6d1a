class IsocenterError(Exception):
    """Base class for all errors raised by the package."""


class ExpressionError(IsocenterError, ValueError):
    """Malformed expression source; ``position`` is a 0-based character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ModelValidationError(IsocenterError, ValueError):
    pass


class DomainError(IsocenterError, ValueError):
    """A point (position, energy, amplitude or phase point) lies outside the admissible region."""


class NumericalError(IsocenterError, RuntimeError):
    """A numerical procedure failed to meet its tolerance."""

    def __init__(self, operation, message):
        super().__init__(f"{operation}: {message}")
        self.operation = operation
