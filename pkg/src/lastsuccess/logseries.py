"""Log-series prior with the records profile.

Here the posterior after ``k >= 1`` trials is negative binomial and the power
series of :mod:`lastsuccess.mixture` become Gauss hypergeometric functions:

    P_k(x) = F(k, k, k+1; x) / k = int_0^1 y^(k-1) (1-xy)^(-k) dy,
    Q_k(x) = int_0^1 y^(k-1) |log(1-xy)| (1-xy)^(-k) dy.

Integrals are evaluated after the substitution ``v = -log(1 - xy)``, which
turns the ``(1-xy)^(-k)`` blow-up at ``y = 1`` into a smooth exponential on
``[0, L]``, ``L = -log(1-x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.optimize import brentq, minimize_scalar

from .exceptions import ConvergenceError, FrontierNotFound, QuadratureError
from .priors import GameState

HYP_TOL = 1e-15
HYP_MAX_TERMS = 10**6
QUAD_EPSREL = 1e-13
QUAD_TOL = 1e-11


def _L(x: float) -> float:
    return -math.log1p(-x)


# ---------------------------------------------------------------------------
# Gauss hypergeometric function


@dataclass(frozen=True)
class Hyp2F1Params:
    a: float
    b: float
    c: float
    x: float

    def __post_init__(self):
        if not 0.0 <= self.x < 1.0:
            raise ValueError(f"argument x = {self.x} outside [0, 1)")
        if self.c <= 0 and float(self.c).is_integer():
            raise ValueError("c must not be a non-positive integer")

    @property
    def euler_ok(self) -> bool:
        return self.c > self.b > 0


def _hyp_series(a, b, c, x, tol=HYP_TOL, max_terms=HYP_MAX_TERMS) -> float:
    term = 1.0
    total = 1.0
    n = 0
    while True:
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x
        term *= ratio
        total += term
        n += 1
        if term == 0.0:
            return total
        # the term ratio tends to x; bound the tail by a geometric series
        r = abs((a + n) * (b + n) / ((c + n) * (n + 1.0)) * x)
        if r < 1 and abs(term) * r / (1 - r) <= tol * abs(total) and abs(term) <= tol * abs(total):
            return total
        if n >= max_terms:
            raise ConvergenceError(f"2F1({a},{b},{c};{x}) did not converge in {max_terms} terms", tol)


def hyp2f1_direct(a, b, c, x) -> float:
    return _hyp_series(a, b, c, x)


def hyp2f1_transformed(a, b, c, x) -> float:
    """``(1-x)^(c-a-b) F(c-a, c-b, c; x)``."""
    return (1.0 - x) ** (c - a - b) * _hyp_series(c - a, c - b, c, x)


def hyp2f1(params: Hyp2F1Params) -> float:
    """``F(a, b, c; x)`` by its series, switching to the transformed series
    for ``x > 1/2`` when that shrinks the numerator parameters."""
    a, b, c, x = params.a, params.b, params.c, params.x
    if x == 0.0:
        return 1.0
    if x > 0.5 and abs((c - a) * (c - b)) < abs(a * b):
        return hyp2f1_transformed(a, b, c, x)
    return hyp2f1_direct(a, b, c, x)


def F(a, b, c, x) -> float:
    return hyp2f1(Hyp2F1Params(a, b, c, x))


# ---------------------------------------------------------------------------
# P_k and Q_k


def _check_kx(k, x):
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= x < 1.0:
        raise ValueError(f"x = {x} outside [0, 1)")


def _quad(f, a, b, tol=QUAD_TOL, points=None) -> float:
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_EPSREL, limit=400, points=points)
    if err > tol * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance", tol)
    return val


def P_hyp(k: int, x: float) -> float:
    """``P_k(x) = F(k, k, k+1; x)/k``."""
    _check_kx(k, x)
    return F(k, k, k + 1, x) / k


def P_euler(k: int, x: float) -> float:
    """``P_k`` from its Euler integral."""
    _check_kx(k, x)
    if x == 0.0:
        return 1.0 / k
    L = _L(x)
    # x^-k int_0^L (e^v - 1)^(k-1) dv
    val = _quad(lambda v: math.expm1(v) ** (k - 1), 0.0, L)
    return val / x**k


def Q_hyp(k: int, x: float) -> float:
    """``Q_k`` from the Euler integral carrying the logarithm."""
    _check_kx(k, x)
    if x == 0.0:
        return 0.0
    L = _L(x)
    val = _quad(lambda v: v * math.expm1(v) ** (k - 1), 0.0, L)
    return val / x**k


def Q_param_series(k: int, x: float, tol=HYP_TOL) -> float:
    """``Q_k`` as ``k^-1 d/da F(a, k, k+1; x)`` at ``a = k``, differentiated
    term by term: the ``n``-th term gains the factor ``sum_{i<n} 1/(k+i)``."""
    _check_kx(k, x)
    term = 1.0
    harm = 0.0
    total = 0.0
    n = 0
    while True:
        harm += 1.0 / (k + n)
        term *= (k + n) * (k + n) / ((k + 1.0 + n) * (n + 1.0)) * x
        n += 1
        total += term * harm
        if term == 0.0:
            break
        r = (k + n) / (n + 1.0) * x * (1.0 + 1.0 / (k + n))
        if r < 1 and term * harm * r / (1 - r) <= tol * total:
            break
        if n >= HYP_MAX_TERMS:
            raise ConvergenceError("parameter-derivative series did not converge", tol)
    return total / k


def P_closed(k: int, x: float) -> float:
    """Closed forms of ``P_1`` and ``P_2``."""
    L = _L(x)
    if k == 1:
        return L / x
    if k == 2:
        return (x - L + x * L) / ((1 - x) * x * x)
    raise ValueError("closed forms exist here for k = 1, 2 only")


def Q_closed(k: int, x: float) -> float:
    L = _L(x)
    if k == 1:
        return L * L / (2 * x)
    if k == 2:
        return (-2 * x + 2 * L - L * L + x * L * L) / (2 * (1 - x) * x * x)
    raise ValueError("closed forms exist here for k = 1, 2 only")


def P2_display(x: float) -> float:
    """The rational-log expression ``2(x - L + xL)/((1-x)x^2)``; equals ``2 P_2``."""
    L = _L(x)
    return 2 * (x - L + x * L) / ((1 - x) * x * x)


def Q2_display(x: float) -> float:
    """``(-2x + 2L - L^2 + xL^2)/((1-x)x^2)``; equals ``2 Q_2``."""
    L = _L(x)
    return (-2 * x + 2 * L - L * L + x * L * L) / ((1 - x) * x * x)


# ---------------------------------------------------------------------------
# bygone value  S_k = k (1-x)^k P_k = (1-x) F(1, 1, k+1; x)


def bygone_value(k: int, x: float) -> float:
    _check_kx(k, x)
    return (1.0 - x) * F(1, 1, k + 1, x)


def _bygone_series(k_lo: int, k_hi: int, x: np.ndarray) -> np.ndarray:
    # F(1, 1, k+1; x) summed directly; fine for x < 0.55
    k = np.arange(k_lo, k_hi + 1)[:, None]
    term = np.ones((k.size, x.size))
    total = np.ones((k.size, x.size))
    for j in range(1, 90):
        term = term * (j * x) / (k + j)
        total += term
    return total


def _bygone_start(x: np.ndarray):
    L = -np.log1p(-x)
    return L / x, 2 * (x - L + x * L) / x**2


def _bygone_step(k, x, b_prev, b_cur):
    # F(1, 1, k+2; x) from k and k+1 by the contiguous relation
    return ((k + 1) * k * (1 - x) * b_prev - (k + 1) * (k - (2 * k - 1) * x) * b_cur) / (k * k * x)


_SPLIT = 0.55


def bygone_table(k_max: int, x) -> np.ndarray:
    """``S_k(x) = (1-x) F(1, 1, k+1; x)`` for ``k = 1..k_max`` on an x-array.

    Returns shape ``(k_max, len(x))``.  Below ``x = 0.55`` the series is
    summed directly; above, the three-term contiguous recurrence in ``k`` is
    run upward from the closed forms of ``k = 1, 2``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((k_max, x.size))
    lo = x < _SPLIT
    if lo.any():
        out[:, lo] = (1 - x[lo]) * _bygone_series(1, k_max, x[lo])
    hi = ~lo
    if hi.any():
        xh = x[hi]
        B = np.empty((k_max + 1, xh.size))
        B[1], b2 = _bygone_start(xh)
        if k_max >= 2:
            B[2] = b2
        for k in range(2, k_max):
            B[k + 1] = _bygone_step(k, xh, B[k - 1], B[k])
        out[:, hi] = (1 - xh) * B[1:]
    return out


def bygone_rows_desc(k_max: int, x, block: int = 32):
    """Yield ``(k, S_k)`` for ``k = k_max, ..., 1`` holding few rows at a time.

    The upward recurrence is run once to store checkpoints at block starts;
    each block is then regenerated from its checkpoint.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = x < _SPLIT
    hi = ~lo
    xh = x[hi]
    starts = list(range(1, k_max + 1, block))
    checkpoints = {}
    b1, b2 = _bygone_start(xh)
    prev, cur = None, b1                      # rows k-1, k
    for k in range(1, k_max + 1):
        if k in starts:
            checkpoints[k] = (prev, cur)
        nxt = b2 if k == 1 else _bygone_step(k, xh, prev, cur)
        prev, cur = cur, nxt
    for start in reversed(starts):
        stop = min(start + block - 1, k_max)
        rows = np.empty((stop - start + 1, x.size))
        if lo.any():
            rows[:, lo] = _bygone_series(start, stop, x[lo])
        if hi.any():
            prev, cur = checkpoints[start]
            for k in range(start, stop + 1):
                rows[k - start, hi] = cur
                nxt = b2 if k == 1 else _bygone_step(k, xh, prev, cur)
                prev, cur = cur, nxt
        rows *= 1 - x
        for k in range(stop, start - 1, -1):
            yield k, rows[k - start]


# ---------------------------------------------------------------------------
# trap integral


def _wlogw(w):
    return -w * math.log(w) if w > 0 else 0.0


def R_integral(k: int, x: float, z: float) -> float:
    """``R_k(x, z)`` (no ``k(1-x)^k`` prefactor) by quadrature.

    ``R_k = int_0^1 y^(k-1) w |log w| (1-xy)^(-(k+1)) dy`` with
    ``w = 1 - xy(1-z)``; in ``v = -log(1-xy)`` the weight becomes
    ``x^-k (1-e^-v)^(k-1) e^(kv)`` and ``w = z + (1-z) e^-v``.
    """
    _check_kx(k, x)
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if x == 0.0 or z == 1.0:
        return 0.0
    L = _L(x)

    def f(v):
        w = z + (1.0 - z) * math.exp(-v)
        return (-math.expm1(-v)) ** (k - 1) * math.exp(k * v) * _wlogw(w)

    return _quad(f, 0.0, L) / x**k


def R0_integral(x: float, z: float) -> float:
    """Winning probability of the z-trap in a state with no trial so far.

    The integrand ``w |log w| / (1 - e^-v)`` has a removable singularity at
    ``v = 0`` where it tends to ``1 - z``; below ``v = 1e-6`` its first-order
    expansion is used.
    """
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if z == 1.0:
        return 0.0
    L = _L(x)
    u = 1.0 - z

    def f(v):
        if v < 1e-6:
            return u - 0.5 * u * u * v
        w = z + u * math.exp(-v)
        return _wlogw(w) / -math.expm1(-v)

    return _quad(f, 0.0, L) / L


def best_trap(k: int, x: float, xatol: float = 1e-10):
    """``(z*, max_z R_k(x, z))`` by bounded scalar minimisation."""
    res = minimize_scalar(lambda z: -R_integral(k, x, z), bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": xatol})
    z, val = float(res.x), -float(res.fun)
    q = R_integral(k, x, 0.0)
    if q >= val:
        return 0.0, q
    return z, val


def rho_balance(k: int, x_lo: float = 0.5, x_hi: Optional[float] = None) -> float:
    """Root in ``x`` of ``P_k(x) = max_z R_k(x, z)``: bygone ties the best trap."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if x_hi is None:
        x_hi = 0.95

    def g(x):
        return P_hyp(k, x) - best_trap(k, x)[1]

    grid = np.linspace(x_lo, x_hi, 19)
    prev = None
    for x in grid:
        v = g(x)
        if prev is not None and (v < 0) != (prev[1] < 0):
            return float(brentq(g, prev[0], x, xtol=1e-12))
        prev = (x, v)
    raise FrontierNotFound(f"no balance point for k={k} in [{x_lo}, {x_hi}]")


def quotient_monotonicity(k_max: int, x_grid) -> bool:
    """``Q_k/P_k < Q_{k+1}/P_{k+1}`` on the grid for ``k < k_max``."""
    for x in np.asarray(x_grid, dtype=float):
        if not 0.0 < x < 1.0:
            continue
        P = [P_hyp(k, x) for k in range(1, k_max + 1)]
        Q = [Q_hyp(k, x) for k in range(1, k_max + 1)]
        for i in range(k_max - 1):
            if not Q[i] * P[i + 1] - Q[i + 1] * P[i] < 0:
                return False
    return True


# ---------------------------------------------------------------------------
# the pacing process


def _c(q: float) -> float:
    return 1.0 / _L(q)


def polya_lundberg_rate(state: GameState, q: float) -> float:
    """Jump intensity of the trial-counting process in ``state``."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    t, k = state.t, state.k
    if q == 1.0 and t == 0.0:
        raise ValueError("q = 1 needs t > 0")
    if k >= 1:
        return k / (t + 1.0 / q - 1.0)
    x = (1.0 - t) * q
    return _c(x) * q / (1.0 - x)


def t1_density(t: float, q: float) -> float:
    """Density of the first trial time on ``[0, 1]``."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if not 0.0 <= t <= 1.0:
        return 0.0
    return _c(q) * q / (1.0 - (1.0 - t) * q)
