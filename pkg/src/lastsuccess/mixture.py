"""Random-N winning probabilities and the bygone/next/trap cutoffs.

Under a power-series prior the winning probabilities in state ``(t, k)`` are
``f_k(x)`` times the power series

    P_k(x)    = sum_j C(k+j, j) w_{k+j} x^j s0(k+1, k+j)         (bygone)
    Q_k(x)    = sum_j C(k+j, j) w_{k+j} x^j s1(k+1, k+j)         (next)
    R_k(x, z) = sum_j C(k+j, j) w_{k+j} x^j S1(k, k+j; z)        (z-trap)

``alpha_k`` is the root of ``P_k = Q_k`` and ``beta_k`` the root of the
z-derivative of ``R_k`` at ``z = 0``.  Missing roots are returned as ``None``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from . import discrete
from .exceptions import DescartesViolation, NotMonotoneError, TruncationError
from .priors import (GameState, PowerSeriesPrior, check_state, log_normalizer_f,
                     log_shape_terms, normalizer_f, scaled_shape_terms)
from .profiles import Profile

ROOT_XTOL = 1e-13
SCAN_LOW = 1e-6
SCAN_HIGH = 1 - 1e-9
INTERLACE_TOL = 1e-8


def _check_profile(prior: PowerSeriesPrior, profile: Profile, last: int):
    if profile.length is not None and last > profile.length:
        if prior.max_n is None or prior.max_n > profile.length:
            raise ValueError(f"explicit profile of length {profile.length} cannot cover "
                             f"the totals allowed by {prior}")


def _terms(prior, profile, k, x):
    c, shift = scaled_shape_terms(prior, k, x)
    if profile.length is not None:
        c = c[: max(profile.length - k + 1, 1)]
    _check_profile(prior, profile, k + c.size - 1)
    return c, shift


def _scaled_PQ(prior, profile, k, x):
    c, shift = _terms(prior, profile, k, x)
    s0, s1 = discrete.forward_s(profile, k + 1, k + c.size - 1)
    return float(c @ s0), float(c @ s1), shift


def series_P(prior: PowerSeriesPrior, profile: Profile, k: int, x: float) -> float:
    """``P_k(x)``; the bygone probability is ``f_k(x) P_k(x)``."""
    P, _, shift = _scaled_PQ(prior, profile, k, x)
    return P * math.exp(shift)


def series_Q(prior: PowerSeriesPrior, profile: Profile, k: int, x: float) -> float:
    """``Q_k(x)``; the next probability is ``f_k(x) Q_k(x)``."""
    _, Q, shift = _scaled_PQ(prior, profile, k, x)
    return Q * math.exp(shift)


def series_PQ(prior, profile, k, x) -> Tuple[float, float]:
    P, Q, shift = _scaled_PQ(prior, profile, k, x)
    e = math.exp(shift)
    return P * e, Q * e


def _log_binom(n, r):
    return gammaln(n + 1.0) - gammaln(r + 1.0) - gammaln(n - r + 1.0)


def _log_q_block(prior, profile, k, i0, i1, y):
    """``log Q_{k+i}(y)`` for ``i = i0..i1-1``."""
    logs = log_shape_terms(prior, k + i1 - 1, y)
    M = logs.size
    last = k + i1 - 1 + M - 1
    if profile.length is not None:
        last = min(last, profile.length)
        if last < k + i1 - 1 + M - 1:
            _check_profile(prior, profile, k + i1 - 1 + M - 1)
    i = np.arange(i0, i1)[:, None]
    m = np.arange(M)[None, :]
    n = k + i + m
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = _log_binom(n, m) + prior.log_weights(n) + m * math.log(y)
        first = k + 1
        off = 1 if float(profile.p(first)) == 1.0 else 0
        logq, odd = discrete._cumulants(profile, first + off, max(last, first + off - 1))
        top = np.minimum(i + m - off, logq.size - 1)
        bot = np.maximum(i - off, 0)
        log_s1 = logq[top] - logq[bot] + np.log(odd[top] - odd[bot])
        if off and i0 == 0:
            # certain success at trial k+1: s1(k+1, k+m) = s0(k+2, k+m)
            mm = np.arange(1, M)
            log_s1[0, 0] = -np.inf
            log_s1[0, 1:] = logq[np.minimum(mm - 1, logq.size - 1)]
        log_s1 = np.where(n <= last, log_s1, -np.inf)
        return logsumexp(logc + log_s1, axis=1)


def log_series_R(prior: PowerSeriesPrior, profile: Profile, k: int, x: float, z: float,
                 tol: float = 1e-16, max_outer: int = 10**6, block: int = 64) -> float:
    """``log R_k(x, z)`` for ``0 < z < 1``, summed by arrivals before the trap.

    ``R_k(x, z) = sum_i C(k+i, i) (xz)^i Q_{k+i}(x (1-z))``.
    """
    y = x * (1.0 - z)
    xz = x * z
    n_outer = max_outer
    if prior.max_n is not None:
        n_outer = max(prior.max_n - k + 1, 1)
    logtol = math.log(tol)
    parts = []
    i0 = 0
    while i0 < n_outer:
        i1 = min(i0 + block, n_outer)
        i = np.arange(i0, i1)
        lq = _log_q_block(prior, profile, k, i0, i1, y)
        with np.errstate(invalid="ignore"):
            parts.append(_log_binom(k + i, i) + i * math.log(xz) + lq)
        i0 = i1
        allt = np.concatenate(parts)
        total = logsumexp(allt)
        if not np.isfinite(total):
            if i0 >= 4 * block:
                return total
            continue
        lastv, prevv = allt[-1], allt[-2] if allt.size > 1 else -np.inf
        if lastv - total <= logtol:
            if not np.isfinite(lastv):
                return float(total)
            logr = lastv - prevv
            if logr < 0 and lastv + logr - math.log(-math.expm1(logr)) - total <= logtol:
                return float(total)
        if block < 1024:
            block *= 2
    if prior.max_n is not None:
        return float(logsumexp(np.concatenate(parts)))
    raise TruncationError(f"R series at x={x}, z={z} did not converge", tol)


def series_R(prior: PowerSeriesPrior, profile: Profile, k: int, x: float, z: float) -> float:
    """``R_k(x, z)``, the z-trap probability without the ``f_k`` factor."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if z == 0.0:
        return series_Q(prior, profile, k, x)
    if z == 1.0 or x == 0.0:
        return 0.0
    return math.exp(log_series_R(prior, profile, k, x, z))


def dz_R0(prior: PowerSeriesPrior, profile: Profile, k: int, x: float) -> float:
    """``d/dz R_k(x, z)`` at ``z = 0``.

    Computed from its own series
    ``-p_{k+1} sum_j C(k+j, j) w_{k+j} j x^j (s0 - s1)(k+2, k+j)``.
    """
    c, shift = _terms(prior, profile, k, x)
    if c.size < 2:
        return 0.0
    p = float(profile.p(k + 1))
    s0, s1 = discrete.forward_s(profile, k + 2, k + c.size - 1)
    # entries for n = k+1 .. k+J-1, i.e. j = 1..J-1
    j = np.arange(1, c.size)
    return float(-p * np.sum(c[1:] * j * (s0 - s1))) * math.exp(shift)


def _sign_changes(d: np.ndarray, scale: np.ndarray, rel: float = 1e-12) -> int:
    s = np.sign(np.where(np.abs(d) > rel * scale, d, 0.0))
    s = s[s != 0]
    return int(np.count_nonzero(np.diff(s)))


def descartes_check(prior, profile, k, x_probe: float = 0.9, kind: str = "alpha") -> int:
    """Sign changes in the coefficients of ``P_k - Q_k`` (or of ``-D_z R_k``).

    The positive factors ``C(k+j, j) w_{k+j}`` do not affect signs, so only
    ``s0 - s1`` is inspected, over the terms that matter at ``x_probe``.
    """
    logs = log_shape_terms(prior, k, x_probe)
    if profile.length is not None:
        logs = logs[: max(profile.length - k + 1, 1)]
    live = np.isfinite(logs)
    if kind == "alpha":
        s0, s1 = discrete.forward_s(profile, k + 1, k + logs.size - 1)
    else:
        s0, s1 = discrete.forward_s(profile, k + 2, k + logs.size - 1)
        s0, s1 = np.concatenate([[0.0], s0]), np.concatenate([[0.0], s1])   # j = 0 has factor 0
    changes = _sign_changes((s0 - s1)[live], (s0 + s1)[live])
    if changes > 1:
        raise DescartesViolation(f"{kind} series for k={k} has {changes} sign changes")
    return changes


def _scan_grid():
    small = np.geomspace(SCAN_LOW, 0.5, 40)
    near = 1.0 - np.geomspace(0.5, 1.0 - SCAN_HIGH, 160)[1:]
    return np.concatenate([small, near])


def _find_root(f, label: str) -> Optional[float]:
    prev_x, prev_v = None, None
    for x in _scan_grid():
        try:
            v = f(x)
        except TruncationError:
            break
        if v == 0.0:
            return float(x)
        if prev_v is not None and (v < 0) != (prev_v < 0):
            return float(brentq(f, prev_x, x, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))
        prev_x, prev_v = x, v
    return None


def root_alpha(prior: PowerSeriesPrior, profile: Profile, k: int) -> Optional[float]:
    """Root of ``P_k(x) = Q_k(x)``; ``None`` when bygone wins for all ``x``."""
    if k < 1:
        raise ValueError("alpha_k needs k >= 1")
    if prior.max_n is not None and k > prior.max_n:
        return None
    descartes_check(prior, profile, k, kind="alpha")

    def f(x):
        P, Q = series_PQ(prior, profile, k, x)
        return P - Q

    return _find_root(f, "alpha")


def root_beta(prior: PowerSeriesPrior, profile: Profile, k: int) -> Optional[float]:
    """Root of ``D_z R_k(x, 0) = 0``; ``None`` when next beats every small trap."""
    if k < 0:
        raise ValueError("beta_k needs k >= 0")
    if prior.max_n is not None and k + 1 > prior.max_n:
        return None
    if float(profile.p(k + 1)) == 0.0:
        return None
    descartes_check(prior, profile, k, kind="beta")
    return _find_root(lambda x: -dz_R0(prior, profile, k, x), "beta")


def cutoff(root: Optional[float], q: float) -> float:
    """Real-time cutoff ``(1 - root/q)_+`` for a root in the scale variable.

    ``x = (1 - t) q`` falls below the root exactly when ``t >= 1 - root/q``.
    A missing root means the later action is preferred from the start.
    """
    if root is None:
        return 0.0
    return max(0.0, 1.0 - root / q)


def cutoffs(prior: PowerSeriesPrior, profile: Profile, k: int, q: Optional[float] = None,
            alpha=None, beta=None) -> Tuple[float, float]:
    """``(a_k, b_k)`` from ``alpha_k`` and ``beta_k``."""
    q = prior.q if q is None else q
    if alpha is None:
        alpha = root_alpha(prior, profile, k)
    if beta is None:
        beta = root_beta(prior, profile, k)
    return cutoff(alpha, q), cutoff(beta, q)


@dataclass(frozen=True)
class CutoffRow:
    k: int
    alpha: Optional[float]
    beta: Optional[float]
    a: float
    b: float


@dataclass(frozen=True)
class CutoffTable:
    prior: str
    profile: str
    q: float
    rows: Tuple[CutoffRow, ...]

    def row(self, k: int) -> CutoffRow:
        for r in self.rows:
            if r.k == k:
                return r
        raise KeyError(k)

    @property
    def a(self) -> List[float]:
        return [r.a for r in self.rows]


def cutoff_table(prior: PowerSeriesPrior, profile: Profile, k_max: int,
                 q: Optional[float] = None) -> CutoffTable:
    """Roots and cutoffs for ``k = 1..k_max``."""
    q = prior.q if q is None else q
    alphas = {k: root_alpha(prior, profile, k) for k in range(1, k_max + 2)}
    rows = []
    for k in range(1, k_max + 1):
        beta = root_beta(prior, profile, k)
        rows.append(CutoffRow(k, alphas[k], beta, cutoff(alphas[k], q), cutoff(beta, q)))
    return CutoffTable(str(prior), str(profile), q, tuple(rows))


@dataclass(frozen=True)
class MonotoneVerdict:
    monotone: bool
    witness: Optional[int]
    alphas: Tuple[Optional[float], ...]
    betas: Tuple[Optional[float], ...]
    beta_below_alpha: Tuple[int, ...]


def _lt(a, b):
    # ordering with None as +infinity
    if a is None:
        return False
    if b is None:
        return True
    return a < b


def monotone_case_test(prior: PowerSeriesPrior, profile: Profile, k_max: int,
                       tol: float = 1e-10) -> MonotoneVerdict:
    """Check ``alpha_1 <= alpha_2 <= ... <= alpha_{k_max}``.

    Reports the first ``k`` with ``alpha_{k+1} < alpha_k`` and every ``k`` with
    ``beta_k < alpha_k``.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    kmax = k_max
    if prior.max_n is not None:
        kmax = min(k_max, prior.max_n)
    alphas = tuple(root_alpha(prior, profile, k) for k in range(1, kmax + 1))
    betas = tuple(root_beta(prior, profile, k) for k in range(1, kmax + 1))
    witness = None
    for k in range(1, kmax):
        a0, a1 = alphas[k - 1], alphas[k]
        if _lt(a1, a0) and (a0 is None or a1 < a0 - tol):
            witness = k
            break
    below = tuple(k for k in range(1, kmax + 1)
                  if betas[k - 1] is not None and alphas[k - 1] is not None
                  and betas[k - 1] < alphas[k - 1] - tol)
    return MonotoneVerdict(witness is None, witness, alphas, betas, below)


def interlacing_check(prior: PowerSeriesPrior, profile: Profile, k_max: int,
                      tol: float = INTERLACE_TOL) -> bool:
    """``alpha_k <= beta_k <= alpha_{k+1}`` for ``k < k_max``; monotone case only."""
    verdict = monotone_case_test(prior, profile, k_max)
    if not verdict.monotone:
        raise NotMonotoneError(f"not in the monotone case (witness k={verdict.witness})")
    alphas, betas = verdict.alphas, verdict.betas

    def le(a, b):
        if b is None:
            return True
        if a is None:
            return False
        return a <= b + tol

    return all(le(alphas[i], betas[i]) and le(betas[i], alphas[i + 1])
               for i in range(len(alphas) - 1))


# ---------------------------------------------------------------------------
# concavity of s1(., n)


def second_difference_formula(profile: Profile, k: int, n: int) -> Fraction:
    """The pgf expression for the second difference, divided by ``s0(k+2, n)``."""
    pk, pk1 = profile.p(k), profile.p(k + 1)
    odds = sum((profile.p(j) / (1 - profile.p(j)) for j in range(k + 2, n + 1)), Fraction(0))
    return (pk - 2 * pk * pk1 - pk1) + (pk * pk1 - pk + pk1) * odds


def second_difference(profile: Profile, k: int, n: int) -> Fraction:
    """``s1(k, n) - 2 s1(k+1, n) + s1(k+2, n)`` exactly (``n >= k+1``)."""
    col = discrete._columns(profile, n)[1]
    return col[k - 1] - 2 * col[k] + col[k + 1]


@dataclass(frozen=True)
class ConcavityVerdict:
    k: int
    sufficient: bool
    exact: bool
    violations: Tuple[int, ...]     # n values where the second difference is positive


def concavity_test(profile: Profile, k_range, n_range) -> List[ConcavityVerdict]:
    """Sufficient two-probability condition and exact second differences per ``k``."""
    n_values = sorted(n_range)
    out = []
    for k in k_range:
        pk, pk1 = profile.p(k), profile.p(k + 1)
        suff = (pk - 2 * pk * pk1 - pk1 <= 0) and (pk * pk1 - pk + pk1 <= 0)
        bad = tuple(n for n in n_values if n >= k + 1 and second_difference(profile, k, n) > 0)
        out.append(ConcavityVerdict(k, suff, not bad, bad))
    return out


# ---------------------------------------------------------------------------
# winning probabilities


def _f(prior, state):
    x = check_state(prior, state)
    return x, normalizer_f(prior, state.k, x)


def mixture_S0(prior: PowerSeriesPrior, profile: Profile, state: GameState) -> float:
    """Probability to win with bygone in ``state``."""
    x, f = _f(prior, state)
    if math.isinf(f):
        # log-series, k = 0, x = 0: one trial to come for sure
        return 1.0 - float(profile.p(1))
    P, _, shift = _scaled_PQ(prior, profile, state.k, x)
    return P * math.exp(shift + log_normalizer_f(prior, state.k, x))


def mixture_S1(prior: PowerSeriesPrior, profile: Profile, state: GameState, z: float) -> float:
    """Probability to win with the z-trap in ``state`` (``z = 0`` is next)."""
    x, f = _f(prior, state)
    if math.isinf(f):
        return float(profile.p(1)) if z == 0.0 else 0.0
    k = state.k
    if z == 1.0:
        return 0.0
    if z == 0.0:
        _, Q, shift = _scaled_PQ(prior, profile, k, x)
        return Q * math.exp(shift + log_normalizer_f(prior, k, x))
    return math.exp(log_series_R(prior, profile, k, x, z) + log_normalizer_f(prior, k, x))
