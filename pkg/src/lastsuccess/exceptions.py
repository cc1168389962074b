"""Exception hierarchy.

Validation problems subclass ValueError; numerical failures subclass
NumericalError so callers (and the CLI) can tell the two apart.
"""


class NumericalError(RuntimeError):
    """A computation could not reach its stated tolerance."""

    def __init__(self, message, tolerance=None):
        super().__init__(message)
        self.tolerance = tolerance


class TruncationError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class FrontierNotFound(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class DescartesViolation(NumericalError):
    """Coefficient signs changed more than once where one change is proven."""


class DivergentSeriesError(ValueError):
    pass


class InconsistentState(ValueError):
    pass


class NotMonotoneError(ValueError):
    pass
