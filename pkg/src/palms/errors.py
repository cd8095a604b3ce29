"""Exception types shared across the toolkit."""


class DataError(ValueError):
    """Raised for malformed input data or infeasible split/selection preconditions."""


class SolverError(RuntimeError):
    """Raised when the dual solver fails to converge within its update budget.

    Carries best-effort diagnostics in ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})


class OracleError(RuntimeError):
    """Raised when a label oracle fails mid-run; ``partial_record`` holds progress so far."""

    def __init__(self, message, partial_record=None):
        super().__init__(message)
        self.partial_record = partial_record


class SessionStateError(RuntimeError):
    """Raised when a labeling-session operation is invalid in the current state."""
