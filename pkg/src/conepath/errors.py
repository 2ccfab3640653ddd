"""Exception types shared across the package."""


class ConepathError(Exception):
    """Base class for errors raised by this package."""


class BoundaryOrExterior(ConepathError):
    """A point required to be strictly interior to a cone is not."""


class Unsupported(ConepathError):
    """Operation not defined for the given cone kind or parameters."""


class NoConvergence(ConepathError):
    """An iterative routine hit its iteration cap without meeting tolerance."""


class EigenFailure(NoConvergence):
    """Symmetric eigendecomposition failed to converge."""


class RejectedWarmStart(ConepathError):
    """Caller-supplied start point violates interiority requirements."""


class DegenerateData(ConepathError):
    """Problem generator input admits no valid instance."""


class InfeasibleTarget(ConepathError):
    """Generator parameters make the requested instance trivially infeasible."""


class NotApplicable(ConepathError):
    """A diagnostic's structural assumptions do not hold for this input."""


class ParseError(ConepathError):
    """Problem or solution file violates the expected format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(ConepathError):
    """Linear algebra breakdown inside the solver."""


class EmptyInput(ConepathError):
    """An aggregation was requested over no usable records."""
