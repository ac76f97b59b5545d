class CurvexError(Exception):
    """Base class for library errors."""


class IncompatibleDataError(CurvexError, ValueError):
    """Right-hand side violates the zero-total-mass compatibility condition."""


class ConvergenceError(CurvexError, RuntimeError):
    """An iterative routine did not converge."""


class NumericalError(CurvexError, FloatingPointError):
    """NaN or inf appeared during an iteration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TraceError(CurvexError, RuntimeError):
    """Curve tracing exceeded its step budget (likely a cycle)."""
