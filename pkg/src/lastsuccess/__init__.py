"""Last-success trapping games for Bernoulli trials paced by mixed binomial processes."""
from .exceptions import (
    ConvergenceError, DescartesViolation, DivergentSeriesError, FrontierNotFound,
    GridTooCoarse, InconsistentState, NotMonotoneError, NumericalError,
    QuadratureError, TruncationError,
)
from .profiles import Profile, parse_profile
from .priors import GameState, PowerSeriesPrior, parse_prior

__version__ = "0.1.0"
