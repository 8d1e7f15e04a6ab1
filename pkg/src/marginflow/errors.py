"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument or malformed input data."""


class ParseError(InputError):
    """Malformed CSV / config input; carries the offending row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InfeasibleError(RuntimeError):
    """The margin constraint system w'x_n >= 1 has no solution."""


class NonConvergenceError(RuntimeError):
    """Iterative solver stalled; carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OverflowError_(RuntimeError):
    """Non-finite value produced mid-computation."""


class NotApplicableError(RuntimeError):
    """The requested quantity is undefined for this input (e.g. no
    non-support points, or no misclassified validation point)."""


class DegenerateCaseError(RuntimeError):
    """Operation requires a non-degenerate max-margin solution; use the
    degenerate chain decomposition instead."""
