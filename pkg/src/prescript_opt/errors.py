"""Exception hierarchy shared by every module of the package."""


class PrescriptOptError(Exception):
    """Base class for all package errors."""


class InvalidInput(PrescriptOptError, ValueError):
    """Raised when arguments violate a documented precondition."""


class SolverStalled(PrescriptOptError, RuntimeError):
    """Raised when an iteration or node limit is exhausted."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NumericalError(PrescriptOptError, ArithmeticError):
    """Raised when a factorization or solve breaks down numerically."""


class NonConvexDetected(PrescriptOptError, RuntimeError):
    """Raised when a secant of psi lies below a later evaluation of psi."""
