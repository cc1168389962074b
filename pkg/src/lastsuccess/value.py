"""Optimal stopping under the log-series prior with the records profile.

``V_k(x)`` is the winning probability of the optimal strategy in state
``(t, k)`` with ``x = (1 - t) q``.  It solves the system

    (1-x) V_k' = k/(k+1) (S_{k+1} - V_{k+1})_+ + k (V_{k+1} - V_k),   V_k(0) = 0,
    (1-x) |log(1-x)| V_0' = max(S_1, V_1) - V_0,                     V_0(0) = 1,

where ``S_k = k (1-x)^k P_k`` is the bygone (stop) value.  In ``s = -log(1-x)``
the first equation is linear in ``V_k`` with forcing
``g = V_{k+1} + (S_{k+1} - V_{k+1})_+ / (k+1)``; it is integrated exactly for
``g`` linear across each step (an exponential integrator), which needs no
special treatment of the kink in ``(.)_+`` beyond the grid resolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq
from scipy.signal import lfilter

from . import discrete
from .bernstein import optimal_z
from .exceptions import ConvergenceError, FrontierNotFound, GridTooCoarse, NumericalError
from .logseries import bygone_rows_desc, rho_balance
from .mixture import cutoff, root_alpha, root_beta
from .priors import logseries, posterior_table
from .profiles import Profile, records

E_INV = math.exp(-1.0)
X_STAR = 1.0 - E_INV
DEFAULT_K = 400
DEFAULT_STEP = 1e-4
RICHARDSON_TOL = 1e-4
EXACT_TOL = 1e-4
EXACT_K = 20
# the K-truncation error decays like 1/K and is largest near x = 1, where a
# single doubling of K from 400 is not always enough
MAX_DOUBLINGS = 2
GAMMA_SLACK = 1e-6       # frontier interpolation error; alpha_k - gamma_k drops below it near k = 40
MYOPIC_K = 60            # explicit myopic cutoffs; the limit is used beyond


def _s_grid(x_max: float, step: float) -> np.ndarray:
    s_max = -math.log1p(-x_max)
    n = int(math.ceil(s_max / step))
    return np.arange(n + 1) * step


def next_value_table(k_max: int, x) -> np.ndarray:
    """``k (1-x)^k Q_k(x)`` for ``k = 1..k_max``: the win probability of next.

    Uses ``Q_k = k^-1 sum_n (k)_n^2 / ((k+1)_n n!) x^n sum_{i<n} 1/(k+i)``,
    meant for moderate ``x`` (terms are summed until negligible).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((k_max, x.size))
    for k in range(1, k_max + 1):
        term = np.ones_like(x)          # C(k+n-1, n) x^n
        harm = 0.0
        total = np.zeros_like(x)
        n = 0
        while True:
            harm += 1.0 / (k + n)
            term = term * (k + n) / (n + 1.0) * x
            n += 1
            add = term * k / (k + n) * harm
            total += add
            if n > 20 and np.all(add <= 1e-17 * np.maximum(total, 1e-300)):
                break
            if n > 100000:
                raise ConvergenceError("next-value series did not converge", 1e-17)
        out[k - 1] = (1 - x) ** k * total
    return out


@dataclass
class ValueGrid:
    """Solution of the value system on an ``x``-grid."""

    x_grid: np.ndarray
    K_max: int
    values: Dict[int, np.ndarray]        # V_k for the stored k (0..keep)
    stop_values: Dict[int, np.ndarray]   # S_k for the stored k >= 1
    gamma: Dict[int, Optional[float]]    # frontier for every k = 1..K_max
    q: float
    step: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def V(self, k: int) -> np.ndarray:
        return self.values[k]

    def at(self, k: int, x: float) -> float:
        return float(np.interp(x, self.x_grid, self.values[k]))


def _frontier(x, V, S) -> Optional[float]:
    d = V - S
    pos = np.nonzero(d > 0)[0]
    if pos.size == 0 or pos[0] == 0:
        return None
    i = pos[0]
    # root of the linear interpolant of V - S between grid points
    return float(x[i - 1] + (x[i] - x[i - 1]) * (-d[i - 1]) / (d[i] - d[i - 1]))


def _seed(x: np.ndarray) -> np.ndarray:
    """Limit of ``V_k`` as ``k -> infinity``: ``(1-x)|log(1-x)|`` below ``1 - 1/e``,
    ``1/e`` above."""
    L = -np.log1p(-x)
    return np.where(x >= X_STAR, E_INV, (1 - x) * L)


def _sweep(x: np.ndarray, s: np.ndarray, h: float, K: int, keep: int):
    V = _seed(x)
    values, stops, gamma = {}, {}, {}
    rows = bygone_rows_desc(K + 1, x)
    _, S_next = next(rows)              # S_{K+1}
    for k, S_k in rows:                 # k = K, ..., 1
        g = V + np.maximum(S_next - V, 0.0) / (k + 1)
        a = k * h
        decay = math.exp(-a)
        w1 = -math.expm1(-a)
        w2 = 1.0 - w1 / a
        b = g[:-1] * (w1 - w2) + g[1:] * w2
        Vk = np.empty_like(V)
        Vk[0] = 0.0
        Vk[1:] = lfilter([1.0], [1.0, -decay], b)
        gamma[k] = _frontier(x, Vk, S_k)
        if k <= keep:
            values[k] = Vk
            stops[k] = S_k
        V, S_next = Vk, S_k
    # V_0: (s V_0)' = max(S_1, V_1) in s
    G = np.maximum(S_next, V)
    G[0] = 1.0
    integral = cumulative_trapezoid(G, s, initial=0.0)
    V0 = np.empty_like(G)
    V0[0] = 1.0
    V0[1:] = integral[1:] / s[1:]
    values[0] = V0
    return values, stops, gamma


def solve_value_grid(q: float = 1.0, K_max: int = DEFAULT_K, step: float = DEFAULT_STEP,
                     x_max: Optional[float] = None, keep: int = 50,
                     check: bool = True) -> ValueGrid:
    """Solve for ``V_0..V_{K_max}`` on a grid uniform in ``s = -log(1-x)``.

    The grid spacing in ``x`` never exceeds ``step``.  With ``check`` the
    solution is compared with the closed form on ``x <= 1 - 1/e`` (raising
    :class:`GridTooCoarse` beyond 1e-4) and with a run at ``K_max/2``; while
    the latter differs by more than 1e-4 for ``k <= 20``, ``K_max`` is doubled
    (at most twice).
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if K_max < 10:
        raise ValueError("K_max must be >= 10")
    if not 0.0 < step <= 1e-3:
        raise ValueError("grid step must lie in (0, 1e-3]")
    if x_max is None:
        x_max = min(q, 1.0 - 1e-6)
    if not 0.0 < x_max < 1.0:
        raise ValueError("x_max must lie in (0, 1)")
    s = _s_grid(x_max, step)
    x = -np.expm1(-s)
    keep = max(keep, EXACT_K)
    diag = {}
    for attempt in range(MAX_DOUBLINGS + 1):
        values, stops, gamma = _sweep(x, s, step, K_max, keep)
        if not check:
            break
        half, _, _ = _sweep(x, s, step, K_max // 2, EXACT_K)
        rich = max(float(np.max(np.abs(values[k] - half[k]))) for k in range(1, EXACT_K + 1))
        diag["richardson"] = rich
        if rich < RICHARDSON_TOL:
            break
        if attempt == MAX_DOUBLINGS:
            raise ConvergenceError(f"V_k changes by {rich:.2e} between K={K_max // 2} and {K_max}",
                                   RICHARDSON_TOL)
        K_max *= 2
    grid = ValueGrid(x, K_max, values, stops, gamma, q, step, diag)
    if check:
        err = exact_region_error(grid)
        diag["exact_region"] = err
        if err > EXACT_TOL:
            raise GridTooCoarse(f"exact-region error {err:.2e} exceeds {EXACT_TOL}", EXACT_TOL)
    return grid


def exact_region_error(grid: ValueGrid, k_max: int = EXACT_K) -> float:
    """``max |V_k - k(1-x)^k Q_k|`` over ``k <= k_max``, ``x <= 1 - 1/e``."""
    mask = grid.x_grid <= X_STAR
    xs = grid.x_grid[mask]
    exact = next_value_table(k_max, xs)
    return max(float(np.max(np.abs(grid.values[k][mask] - exact[k - 1])))
               for k in range(1, k_max + 1))


def hat_transform(grid: ValueGrid, k: int) -> np.ndarray:
    """``V_k / (k (1-x)^k)``."""
    return grid.values[k] / (k * (1.0 - grid.x_grid) ** k)


def gamma_root(grid: ValueGrid, k: int, check_alpha: bool = True) -> float:
    """Stopping frontier: the first ``x`` where continuing beats the stop value."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k not in grid.gamma:
        raise ValueError(f"k = {k} exceeds the grid's K_max = {grid.K_max}")
    g = grid.gamma[k]
    if g is None:
        raise FrontierNotFound(f"V_{k} never exceeds the stop value on the grid")
    if check_alpha:
        a = root_alpha(logseries(1.0), records(), k)
        if a is not None and not g < a + GAMMA_SLACK:
            raise NumericalError(f"gamma_{k} = {g} is not below alpha_{k} = {a}")
    return g


# ---------------------------------------------------------------------------
# information bounds


@dataclass(frozen=True)
class InfoBound:
    k: int
    x: float
    bound: float
    bygone: float
    next: float
    best_trap: float
    informed_stop: float


def _option_values(profile: Profile, k: int, J: int, with_trap: bool = True):
    """Per-``j`` option values for ``j = 0..J-1`` remaining trials."""
    first = k + 1
    size = J
    s0 = np.empty(J)
    s1 = np.empty(J)
    s0f, s1f = discrete.forward_s(profile, first, k + J - 1)
    s0[:] = s0f[:J]
    s1[:] = s1f[:J]
    # informed stop: max over m >= k+1 of s1(m, k+j)
    M = discrete.s1_matrix(profile, first, size)
    stop = M.max(axis=0)
    trap = np.zeros(J)
    if with_trap:
        for j in range(1, J):
            trap[j] = optimal_z(profile, k, k + j).value
    return s0, s1, trap, stop


def info_bound(q: float, k: int, x: float, prior=None, profile: Optional[Profile] = None,
               mass_tol: float = 1e-13) -> InfoBound:
    """Posterior-weighted value of a gambler told the number of remaining trials."""
    if not 0.0 <= x < 1.0:
        raise ValueError("x must lie in [0, 1)")
    prior = logseries(q) if prior is None else prior
    profile = records() if profile is None else profile
    w = posterior_table(prior, k, x)
    cdf = np.cumsum(w)
    J = int(np.searchsorted(cdf, 1.0 - mass_tol)) + 1
    J = max(min(J, w.size), 1)
    w = w[:J]
    s0, s1, trap, stop = _option_values(profile, k, J)
    per_j = np.maximum.reduce([s0, s1, trap, stop])
    return InfoBound(k, x, float(w @ per_j), float(w @ s0), float(w @ s1), float(w @ trap),
                     float(w @ stop))


def informed_continuation(k: int, x: float, q: float = 1.0, profile: Optional[Profile] = None,
                          mass_tol: float = 1e-13) -> float:
    """Posterior weight of ``max_{m >= k+1} s1(m, k+j)``: informed play without bygone."""
    profile = records() if profile is None else profile
    w = posterior_table(logseries(q), k, x)
    cdf = np.cumsum(w)
    J = max(min(int(np.searchsorted(cdf, 1.0 - mass_tol)) + 1, w.size), 1)
    M = discrete.s1_matrix(profile, k + 1, J)
    return float(w[:J] @ M.max(axis=0))


def delta_root(k: int, x_lo: float = 0.3, x_hi: float = 0.95) -> float:
    """Crossing of the informed continuation value with the stop value.

    The informed gambler here knows the remaining count but may not bet on
    zero further successes; bygone is the stop value it is compared with.
    """
    from .logseries import bygone_value

    def f(x):
        return informed_continuation(k, x) - bygone_value(k, x)

    grid = np.linspace(x_lo, x_hi, 14)
    prev = None
    for x in grid:
        v = f(x)
        if prev is not None and (v > 0) != (prev[1] > 0):
            return float(brentq(f, prev[0], x, xtol=1e-10))
        prev = (x, v)
    raise FrontierNotFound(f"no informed-bound crossing for k={k}")


# ---------------------------------------------------------------------------
# reports


TABLE_K = (1, 2, 3, 4, 5, 10)


@dataclass(frozen=True)
class Table1Row:
    k: int
    alpha: float
    beta: float
    gamma: float
    delta: Optional[float]
    rho: float


def table1(ks=TABLE_K, step: float = DEFAULT_STEP, K_max: int = DEFAULT_K,
           x_max: float = 0.95, with_delta: bool = True) -> List[Table1Row]:
    """Critical points for the log-series prior (``q = 1``) with records."""
    prior, prof = logseries(1.0), records()
    grid = solve_value_grid(1.0, K_max, step, x_max=x_max, check=False)
    rows = []
    for k in ks:
        rows.append(Table1Row(
            k,
            root_alpha(prior, prof, k),
            root_beta(prior, prof, k),
            gamma_root(grid, k),
            delta_root(k) if with_delta else None,
            rho_balance(k),
        ))
    return rows


@dataclass(frozen=True)
class StrategyComparison:
    q: float
    rows: Tuple[Tuple[int, float, float, float, float], ...]   # k, alpha, gamma, a_k, g_k
    myopic: object
    optimal: object
    analytic_optimal: float


def limit_cutoff(q: float) -> float:
    return max(0.0, 1.0 - X_STAR / q)


def optimal_vs_myopic_report(q: float, k_max: int = 10, n_paths: int = 200_000, seed: int = 0,
                             step: float = DEFAULT_STEP, K_max: int = DEFAULT_K) -> StrategyComparison:
    """Myopic (alpha) cutoffs against frontier (gamma) cutoffs from ``t = 0``.

    Both strategies are simulated with common random numbers; the optimal
    value ``V_0(q)`` from the value grid is reported alongside.
    """
    from .simulate import CutoffStop, estimate_many
    from .priors import GameState

    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1) so that the game can start at t = 0")
    prior, prof = logseries(q), records()
    grid = solve_value_grid(q, K_max, step, check=False)
    a_all = [cutoff(root_alpha(prior, prof, k), q) for k in range(1, max(k_max, MYOPIC_K) + 1)]
    g_all = [cutoff(grid.gamma[k], q) for k in range(1, grid.K_max + 1)]
    rows = tuple((k, root_alpha(prior, prof, k), grid.gamma[k], a_all[k - 1], g_all[k - 1])
                 for k in range(1, k_max + 1))
    tail = limit_cutoff(q)
    myopic = CutoffStop(tuple(a_all), tail)
    optimal = CutoffStop(tuple(g_all), tail)
    res = estimate_many([myopic, optimal], prior, prof, GameState(0.0, 0), n_paths, seed, crn=True)
    return StrategyComparison(q, rows, res[0], res[1], float(grid.values[0][-1]))
