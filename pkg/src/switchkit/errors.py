"""Exception hierarchy shared by all switchkit modules."""


class SwitchkitError(Exception):
    """Base class for all switchkit errors."""


class ParameterError(SwitchkitError, ValueError):
    """A constructor or operation received an invalid parameter."""


class DomainError(SwitchkitError, ValueError):
    """A function was evaluated outside its domain (e.g. s <= 0 or t <= 0)."""


class RangeError(SwitchkitError, ValueError):
    """A time lies outside the span covered by a trajectory."""


class BoundaryError(RangeError):
    """No switch epoch exists on one side of the requested time."""


class PrecisionError(SwitchkitError, ArithmeticError):
    """Floating point precision is insufficient for the requested computation."""


class SingularityError(PrecisionError):
    """A denominator is too close to zero."""


class TailError(SwitchkitError, ValueError):
    """A grid function has not converged to its tail value at the end of its grid."""


class ResolutionError(SwitchkitError, ValueError):
    """A grid is too coarse for the requested operation."""


class ValidationError(SwitchkitError):
    """Input curves fail a structural requirement."""


class MonotonicityError(ValidationError):
    """Expected-value curves are not monotone within noise."""


class PreconditionError(ValidationError):
    """An operation was called on input violating its stated precondition."""


class DensityError(ValidationError):
    """A grid density cannot be normalised into a probability density."""
