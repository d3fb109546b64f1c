"""Exception hierarchy shared by all modules."""


class PosgainError(Exception):
    """Base class for errors raised by this package."""


class InvalidInput(PosgainError, ValueError):
    """Non-finite or malformed numeric input."""


class DimensionError(PosgainError, ValueError):
    """Incompatible matrix or signal dimensions."""


class NotNonnegative(PosgainError, ValueError):
    """A matrix required to be entrywise nonnegative is not."""


class InvalidOrder(PosgainError, ValueError):
    """Lifting order must be a positive integer."""


class UnstableSystem(PosgainError):
    """The state matrix is not Schur stable."""


class UnsupportedCone(PosgainError):
    """The copositive cone cannot be handled directly by the solver."""


class ColumnCountExceeded(PosgainError, ValueError):
    """Exact positive matrix norm requested for more than four columns."""


class SolverFailure(PosgainError):
    """The conic solver could not decide a subproblem."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
