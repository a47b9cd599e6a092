"""Exception hierarchy.

Separate classes are used instead of ``ValueError``/``RuntimeError`` so that
callers can tell a bad argument from a failed mathematical hypothesis or a
numerical breakdown.
"""


class ArgumentError(Exception):
    """Raised when an argument is malformed (shape, range, missing data)."""


class NumericsError(Exception):
    """Raised when a numerical primitive breaks down (overflow, NaN)."""


class QuadratureError(NumericsError):
    """Raised when adaptive quadrature fails to reach the requested accuracy.

    Carries the partial result and the achieved error estimate so callers
    can report how far off the computation ended.
    """

    def __init__(self, msg, result=None, error_estimate=None):
        super().__init__(msg)
        self.result = result
        self.error_estimate = error_estimate


class SpectrumProximityError(Exception):
    """Raised when a resolvent is requested too close to the spectrum."""


class HypothesisError(Exception):
    """Raised when a mathematical hypothesis required by a construction fails.

    Examples: the upper bound on the energy form, positive definiteness of a
    metric, a nonpositive kernel form where positivity is required.
    """


class ConsistencyError(Exception):
    """Raised when two internally computed routes disagree beyond tolerance."""


class RegularityError(Exception):
    """Raised when the embedded base space degenerates in a quotient section."""


class ShiftDomainError(Exception):
    """Raised when the translation operator is applied outside its window.

    This is a finite-section truncation limit, not a mathematical failure.
    """
