"""Power-series priors for the total number of trials.

A prior is ``pi_n = c(q) w_n q^n``.  Given ``k`` trials before time ``t`` the
number of trials still to come has the posterior

    pi(j | t, k) = f_k(x) C(k+j, j) w_{k+j} x^j,      x = (1 - t) q,

so every random-N quantity is a power series in ``x`` with coefficients
``C(k+j, j) w_{k+j}``.  :func:`shape_terms` produces these coefficients with
a tail-bounded truncation shared by all the series in the package.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DivergentSeriesError, InconsistentState, TruncationError

GEOMETRIC = "geometric"
NEGBIN = "negbin"
LOGSERIES = "logseries"
WEIGHTS = "weights"

SERIES_TOL = 1e-16
MAX_TERMS = 10**6


@dataclass(frozen=True)
class PowerSeriesPrior:
    kind: str
    q: float
    nu: Optional[float] = None
    weights: Tuple[float, ...] = ()      # w_1, w_2, ... for kind 'weights'
    _cdf: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False,
                                  compare=False, hash=False)

    def __post_init__(self):
        q = self.q
        if self.kind in (GEOMETRIC, NEGBIN):
            if not 0 < q < 1:
                raise DivergentSeriesError(f"{self.kind} prior needs 0 < q < 1, got {q}")
            if self.kind == NEGBIN and not (self.nu and self.nu > 0):
                raise ValueError("negative binomial prior needs nu > 0")
        elif self.kind == LOGSERIES:
            if not 0 < q <= 1:
                raise DivergentSeriesError(f"log-series prior needs 0 < q <= 1, got {q}")
        elif self.kind == WEIGHTS:
            if not self.weights or any(w < 0 for w in self.weights) or not any(self.weights):
                raise ValueError("explicit weights must be non-negative and not all zero")
            if q <= 0:
                raise ValueError("q must be positive")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    # -- weights -----------------------------------------------------------
    @property
    def max_n(self) -> Optional[int]:
        return len(self.weights) if self.kind == WEIGHTS else None

    def log_weights(self, n) -> np.ndarray:
        """``log w_n`` (``-inf`` for zero weights)."""
        n = np.asarray(n)
        with np.errstate(divide="ignore"):
            if self.kind == GEOMETRIC:
                return np.zeros(n.shape)
            if self.kind == NEGBIN:
                nu = self.nu
                return gammaln(n + nu) - gammaln(nu) - gammaln(n + 1.0)
            if self.kind == LOGSERIES:
                return np.where(n > 0, -np.log(np.where(n > 0, n, 1)), -np.inf)
            table = np.log(np.array([0.0] + list(self.weights)))
            inside = n <= len(self.weights)
            return np.where(inside, table[np.where(inside, n, 0)], -np.inf)

    def weight(self, n: int) -> float:
        return float(np.exp(self.log_weights(n)))

    def weight_ratio_bound(self, n: int) -> float:
        """An upper bound for ``w_{m+1}/w_m`` over all ``m >= n``."""
        if self.kind == NEGBIN and self.nu > 1:
            return (n + self.nu) / (n + 1.0)
        return 1.0

    # -- normaliser --------------------------------------------------------
    @property
    def c(self) -> float:
        """Normaliser ``c(q) = 1 / sum_n w_n q^n``."""
        return 1.0 / self.series_sum(self.q)

    def series_sum(self, x: float) -> float:
        """``sum_n w_n x^n``."""
        if self.kind == GEOMETRIC:
            return 1.0 / (1.0 - x)
        if self.kind == NEGBIN:
            return (1.0 - x) ** (-self.nu)
        if self.kind == LOGSERIES:
            if x >= 1.0:
                raise DivergentSeriesError("log-series weights diverge at x = 1")
            return -math.log1p(-x)
        return float(sum(w * x**n for n, w in enumerate(self.weights, start=1)))

    def __str__(self):
        if self.kind == NEGBIN:
            return f"negbin:{self.nu},{self.q}"
        if self.kind == WEIGHTS:
            return "weights:" + ",".join(repr(w) for w in self.weights) + f":{self.q}"
        return f"{self.kind}:{self.q}"

    def with_q(self, q: float) -> "PowerSeriesPrior":
        return PowerSeriesPrior(self.kind, q, self.nu, self.weights)


def geometric(q: float) -> PowerSeriesPrior:
    return PowerSeriesPrior(GEOMETRIC, q)


def negbin(nu: float, q: float) -> PowerSeriesPrior:
    """Weights ``w_n = C(n + nu - 1, n)``; ``nu = 1`` is the geometric prior."""
    return PowerSeriesPrior(NEGBIN, q, nu=float(nu))


def logseries(q: float) -> PowerSeriesPrior:
    return PowerSeriesPrior(LOGSERIES, q)


def explicit_weights(weights, q: float = 1.0) -> PowerSeriesPrior:
    """Finite weights ``w_1, w_2, ...`` (``w_0 = 0``)."""
    return PowerSeriesPrior(WEIGHTS, q, weights=tuple(float(w) for w in weights))


def parse_prior(spec: str) -> PowerSeriesPrior:
    """Parse ``geometric:<q>``, ``logseries:<q>``, ``negbin:<nu>,<q>`` or
    ``weights:<w1,w2,...>:<q>``."""
    head, _, body = spec.strip().partition(":")
    try:
        if head == GEOMETRIC:
            return geometric(float(body))
        if head == LOGSERIES:
            return logseries(float(body))
        if head == NEGBIN:
            nu, q = body.split(",")
            return negbin(float(nu), float(q))
        if head == WEIGHTS:
            ws, _, q = body.rpartition(":")
            return explicit_weights([float(w) for w in ws.split(",")], float(q))
    except ValueError as exc:
        raise ValueError(f"malformed prior spec {spec!r}: {exc}") from None
    raise ValueError(f"malformed prior spec {spec!r}")


@dataclass(frozen=True)
class GameState:
    """The event ``N_t = k``."""

    t: float
    k: int

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise InconsistentState(f"time {self.t} outside [0, 1]")
        if self.k < 0:
            raise InconsistentState(f"negative trial count {self.k}")

    def x(self, prior: PowerSeriesPrior) -> float:
        """Scale variable ``(1 - t) q``."""
        return (1.0 - self.t) * prior.q

    @classmethod
    def from_x(cls, x: float, k: int, q: float) -> "GameState":
        return cls(1.0 - x / q, k)


def check_state(prior: PowerSeriesPrior, state: GameState) -> float:
    """Validate a state against a prior and return its scale ``x``."""
    x = state.x(prior)
    if prior.kind == LOGSERIES and prior.q == 1.0 and state.t == 0.0:
        raise InconsistentState("log-series prior with q = 1 needs an initial time t > 0")
    if prior.max_n is not None and state.k > prior.max_n:
        raise InconsistentState(f"k = {state.k} exceeds the largest possible total {prior.max_n}")
    if prior.kind == LOGSERIES and state.k == 0 and state.t == 1.0:
        raise InconsistentState("under the log-series prior no state (1, 0) exists")
    return x


# ---------------------------------------------------------------------------
# truncated series


def _log_shape(prior: PowerSeriesPrior, k: int, j: np.ndarray, x: float) -> np.ndarray:
    n = k + j
    logc = gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(k + 1.0) + prior.log_weights(n)
    if x > 0:
        return logc + j * math.log(x)
    return np.where(j == 0, logc, -np.inf)


def log_shape_terms(prior: PowerSeriesPrior, k: int, x: float, tol: float = SERIES_TOL,
                    max_terms: int = MAX_TERMS) -> np.ndarray:
    """``log`` of the coefficients ``C(k+j, j) w_{k+j} x^j``, ``j = 0..J-1``.

    ``J`` is the first length at which the last term is below ``tol`` times
    the running sum and the geometric tail bound
    ``term * r / (1 - r)``, ``r = x (k+J+1)/(J+1) sup w_{m+1}/w_m``, is too.
    """
    if x < 0:
        raise ValueError("x must be non-negative")
    if prior.max_n is not None:
        J = max(prior.max_n - k + 1, 1)
        return _log_shape(prior, k, np.arange(J), x)
    if x == 0.0:
        return _log_shape(prior, k, np.arange(1), x)
    if x >= 1.0:
        raise DivergentSeriesError(f"series diverges at x = {x}")
    J = 64
    logtol = math.log(tol)
    while True:
        logs = _log_shape(prior, k, np.arange(J), x)
        total = logsumexp(logs)
        last = logs[-1]
        r = x * (k + J) / J * prior.weight_ratio_bound(k + J - 1)
        if (np.isfinite(total) and last - total <= logtol and r < 1
                and last + math.log(r / (1 - r)) - total <= logtol):
            return logs
        if J >= max_terms:
            raise TruncationError(f"series at x={x}, k={k} needs more than {max_terms} terms", tol)
        J = min(2 * J, max_terms)


def scaled_shape_terms(prior: PowerSeriesPrior, k: int, x: float, tol: float = SERIES_TOL):
    """``(terms, shift)`` with the true coefficients equal to ``terms * exp(shift)``."""
    logs = log_shape_terms(prior, k, x, tol)
    shift = float(np.max(logs))
    if not np.isfinite(shift):
        shift = 0.0
    return np.exp(logs - shift), shift


def shape_terms(prior: PowerSeriesPrior, k: int, x: float, tol: float = SERIES_TOL,
                max_terms: int = MAX_TERMS) -> np.ndarray:
    """Coefficients ``C(k+j, j) w_{k+j} x^j`` (see :func:`log_shape_terms`)."""
    return np.exp(log_shape_terms(prior, k, x, tol, max_terms))


def log_normalizer_f(prior: PowerSeriesPrior, k: int, x: float) -> float:
    """``log f_k(x)``."""
    if prior.kind == LOGSERIES and k >= 1:
        return math.log(k) + k * math.log1p(-x)
    if prior.kind == GEOMETRIC:
        return (k + 1) * math.log1p(-x)
    if prior.kind == NEGBIN:
        nu = prior.nu
        return float((k + nu) * math.log1p(-x) - (gammaln(k + nu) - gammaln(nu) - gammaln(k + 1.0)))
    return math.log(normalizer_f(prior, k, x))


def normalizer_f(prior: PowerSeriesPrior, k: int, x: float) -> float:
    """``f_k(x)``, making the posterior masses sum to one."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0.0 <= x < 1.0 and prior.max_n is None:
        raise DivergentSeriesError(f"x = {x} outside [0, 1)")
    if prior.kind == LOGSERIES:
        if k >= 1:
            return k * (1.0 - x) ** k
        if x == 0.0:
            return math.inf
        return -1.0 / math.log1p(-x)
    if prior.kind == GEOMETRIC:
        return (1.0 - x) ** (k + 1)
    if prior.kind == NEGBIN:
        nu = prior.nu
        logb = gammaln(k + nu) - gammaln(nu) - gammaln(k + 1.0)
        return float(np.exp((k + nu) * np.log1p(-x) - logb))
    total = shape_terms(prior, k, x).sum()
    if not total > 0:
        raise InconsistentState(f"prior puts no mass on totals >= {k}")
    return 1.0 / total


def prior_pmf(prior: PowerSeriesPrior, n: int) -> float:
    """``pi_n = c(q) w_n q^n``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if prior.kind == LOGSERIES and prior.q == 1.0:
        raise DivergentSeriesError("the log-series prior with q = 1 is improper")
    lw = float(prior.log_weights(n))
    if lw == -math.inf:
        return 0.0
    return prior.c * math.exp(lw + n * math.log(prior.q))


def posterior_pmf(prior: PowerSeriesPrior, state: GameState, j: int) -> float:
    """``P(N_1 - N_t = j | N_t = k)``."""
    if j < 0:
        return 0.0
    x = check_state(prior, state)
    k = state.k
    f = normalizer_f(prior, k, x)
    if math.isinf(f):
        # log-series, k = 0 at x -> 0: one more trial for sure
        return 1.0 if j == 1 else 0.0
    return f * float(np.exp(_log_shape(prior, k, np.array([j]), x))[0])


def posterior_table(prior: PowerSeriesPrior, k: int, x: float) -> np.ndarray:
    """Posterior masses ``pi(j | k, x)`` for ``j = 0..J-1`` (truncated)."""
    if prior.kind == LOGSERIES and k == 0 and x == 0.0:
        return np.array([0.0, 1.0])
    terms, _ = scaled_shape_terms(prior, k, x)
    return terms / terms.sum()


# ---------------------------------------------------------------------------
# sampling


def _cdf_table(prior: PowerSeriesPrior, size: int) -> np.ndarray:
    # prefix table of the prior cdf, grown on demand under a lock
    with prior._lock:
        table = prior._cdf.get("cdf")
        if table is None or table.size < size:
            new = max(size, 2 * (table.size if table is not None else 64))
            if prior.max_n is not None:
                new = prior.max_n + 1
            n = np.arange(new)
            lw = prior.log_weights(n)
            pmf = prior.c * np.exp(lw + n * math.log(prior.q))
            table = np.cumsum(pmf)
            table.setflags(write=False)
            prior._cdf["cdf"] = table
        return table


def sample_total(prior: PowerSeriesPrior, rng: np.random.Generator, size=None):
    """Draw the total number of trials by inverse cdf."""
    if prior.kind == LOGSERIES and prior.q == 1.0:
        raise DivergentSeriesError("cannot sample from the improper q = 1 log-series prior")
    u = rng.random(size)
    table = _cdf_table(prior, 64)
    while prior.max_n is None and np.max(u) >= table[-1] and table[-1] < 1.0 - 1e-15:
        table = _cdf_table(prior, 2 * table.size)
    out = np.searchsorted(table, u, side="right")
    out = np.minimum(out, table.size - 1)
    return int(out) if size is None else out


def sample_posterior(prior: PowerSeriesPrior, k: int, x: float, rng: np.random.Generator, size):
    """Draw the number of future trials from ``pi(. | k, x)`` by inverse cdf."""
    cdf = np.cumsum(posterior_table(prior, k, x))
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    return np.minimum(out, cdf.size - 1)
