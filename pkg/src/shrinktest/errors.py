"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``InvalidArgumentError`` -> 1,
``NumericFailureError`` -> 2.
"""


class ShrinkTestError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ShrinkTestError, ValueError):
    """An argument is outside its documented domain."""


class MissingParameterError(InvalidArgumentError):
    """A procedure needs a parameter that was not supplied (e.g. ``p`` for tau = p)."""


class MissingLimitError(InvalidArgumentError):
    """An asymptotic formula needs the limit constant C but none is attached."""


class DegenerateRegimeError(InvalidArgumentError):
    """The Oracle threshold formula is non-positive for the given parameters."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NumericFailureError(ShrinkTestError, ArithmeticError):
    """Quadrature or root finding did not reach the requested accuracy."""

    def __init__(self, message, achieved_tolerance=None):
        if achieved_tolerance is not None:
            message = f"{message} (achieved tolerance {achieved_tolerance:.3g})"
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class NoCrossingError(NumericFailureError):
    """The requested level is not bracketed by the statistic's range."""


class DegeneratePosteriorError(NumericFailureError):
    """Every hyper-grid node underflowed after max-subtraction."""


class GridEscapeError(NumericFailureError):
    """Too much posterior mass sits on the boundary of the hyper-grid."""

    def __init__(self, message, boundary_mass=None):
        super().__init__(message)
        self.boundary_mass = boundary_mass
