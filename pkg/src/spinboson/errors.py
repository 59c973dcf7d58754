"""Exception types shared across the package."""


class SpinBosonError(Exception):
    """Base class for all package errors."""


class ParameterError(SpinBosonError, ValueError):
    """A constructor or operation received out-of-range parameters."""


class DomainError(SpinBosonError, ValueError):
    """An input lies outside the mathematical domain of the operation."""


class DegenerateStateError(SpinBosonError, ArithmeticError):
    """A trial state has numerically vanishing norm."""


class OptimizationFailure(SpinBosonError, RuntimeError):
    """No restart produced a converged minimum."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics) if diagnostics else {}


class BasisSizeError(SpinBosonError, ValueError):
    """A Fock-basis request exceeds the configured size cap."""


class TruncationError(SpinBosonError, ArithmeticError):
    """A coherent state cannot be represented in the truncated Fock basis."""


class FitError(SpinBosonError, RuntimeError):
    """A fit was refused: unusable data or a singular problem."""


class SchemaError(SpinBosonError, ValueError):
    """A CSV or config input is missing or has a malformed column."""
