"""Exception types raised by the package."""


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance.

    ``estimates`` holds the last two successive-refinement estimates (as
    log-magnitudes) so callers can judge how far off they were.
    """

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class InputError(ValueError):
    """Bad input, e.g. a local density returning NaN."""


class PreconditionError(ValueError):
    """A documented precondition of an operation is violated."""


class BoundRangeError(PreconditionError):
    """A bound was requested outside the parameter range where it is valid."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class InternalConsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""


class SamplingError(RuntimeError):
    """Inverse-CDF grid construction failed."""
