"""Trapping with a fixed number of trials in continuous time.

With ``n`` trials at uniform order statistics and ``k`` already observed, the
z-strategy traps the final fraction ``1 - z`` of the remaining time.  Its
winning probability is the Bernstein polynomial

    S1(k, n; z) = sum_j C(n-k, j) z^j (1-z)^(n-k-j) s1(k+j+1, n),

and ``S0`` is the same polynomial with ``s0`` coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from . import discrete
from .exceptions import NumericalError
from .profiles import Profile

# exact coefficients are cheap below this n; above it we use float cumulants
_EXACT_COEFF_MAX_N = 60
# exact integer binomials below this degree, log-space above
_LOG_BINOM_DEGREE = 60


@lru_cache(maxsize=1024)
def _coefficients(profile: Profile, k: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(s0, s1) coefficient vectors ``s(k+j+1, n)``, ``j = 0..n-k``."""
    if n <= _EXACT_COEFF_MAX_N:
        c0, c1 = discrete._columns(profile, n)
        s0 = np.array([float(v) for v in c0[k:]])
        s1 = np.array([float(v) for v in c1[k:]])
    else:
        s0, s1 = discrete.backward_s(profile, k + 1, n)
    s0.setflags(write=False)
    s1.setflags(write=False)
    return s0, s1


def bernstein_basis(m: int, z) -> np.ndarray:
    """Matrix of ``C(m, j) z^j (1-z)^(m-j)``, shape ``(len(z), m+1)``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    j = np.arange(m + 1)
    out = np.zeros((z.size, m + 1))
    out[z == 0.0, 0] = 1.0
    out[z == 1.0, m] = 1.0
    inner = (z > 0.0) & (z < 1.0)
    if inner.any():
        zi = z[inner][:, None]
        if m <= _LOG_BINOM_DEGREE:
            binom = np.array([math.comb(m, i) for i in j], dtype=float)
            out[inner] = binom * zi ** j * (1.0 - zi) ** (m - j)
        else:
            logc = gammaln(m + 1) - gammaln(j + 1) - gammaln(m - j + 1)
            out[inner] = np.exp(logc + j * np.log(zi) + (m - j) * np.log1p(-zi))
    return out


def _evaluate(coeffs: np.ndarray, z):
    scalar = np.ndim(z) == 0
    vals = bernstein_basis(coeffs.size - 1, z) @ coeffs
    return float(vals[0]) if scalar else vals


def _derivative(coeffs: np.ndarray, z):
    m = coeffs.size - 1
    if m == 0:
        return 0.0 if np.ndim(z) == 0 else np.zeros(np.shape(z))
    return m * _evaluate(np.diff(coeffs), z)


def _check_kn(k, n):
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")


@dataclass(frozen=True)
class TrapPolynomial:
    """``S1(k, n; .)`` held by its Bernstein coefficients ``s1(k+j+1, n)``."""

    k: int
    n: int
    coefficients: Tuple[float, ...]

    def __call__(self, z):
        return _evaluate(np.asarray(self.coefficients), z)

    def derivative(self, z):
        return _derivative(np.asarray(self.coefficients), z)


def trap_polynomial(profile: Profile, k: int, n: int) -> TrapPolynomial:
    _check_kn(k, n)
    return TrapPolynomial(k, n, tuple(_coefficients(profile, k, n)[1]))


def bernstein_S1(profile: Profile, k: int, n: int, z):
    """Winning probability of the z-strategy with ``n - k`` trials to come."""
    _check_kn(k, n)
    return _evaluate(_coefficients(profile, k, n)[1], z)


def bernstein_S0(profile: Profile, k: int, n: int, z):
    """Probability that the z-trap catches no success."""
    _check_kn(k, n)
    return _evaluate(_coefficients(profile, k, n)[0], z)


def bernstein_S1_derivative(profile: Profile, k: int, n: int, z):
    _check_kn(k, n)
    return _derivative(_coefficients(profile, k, n)[1], z)


def increment_polynomial(profile: Profile, n: int, z):
    """Marginal gain density of extending the trap ``[z, 1]`` to the left.

    Equals ``-d/dz S1(0, n; z)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s0, s1 = _coefficients(profile, 0, n)
    p = profile.p_array(np.arange(1, n + 1))
    coeffs = n * p * (s0[1:] - s1[1:])
    return _evaluate(coeffs, z)


class Mode(NamedTuple):
    z: float
    value: float


def trapping_ineffective(profile: Profile, k: int, n: int) -> bool:
    """True when ``z = 0`` (the action ``next``) is the best z-strategy.

    By unimodality this happens iff the polynomial does not increase at 0,
    i.e. ``s1(k+1, n) >= s1(k+2, n)``, i.e. ``sum_{j=k+2..n} odds <= 1``.
    """
    if k >= n - 1:
        return True
    c1 = discrete._columns(profile, n)[1] if n <= _EXACT_COEFF_MAX_N else None
    if c1 is not None:
        return c1[k] >= c1[k + 1]
    s1 = _coefficients(profile, k, n)[1]
    return s1[0] >= s1[1]


def optimal_z(profile: Profile, k: int, n: int, xtol: float = 1e-12) -> Mode:
    """Mode of ``z -> S1(k, n; z)`` and the maximal winning probability."""
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}, n={n}")
    s1 = _coefficients(profile, k, n)[1]
    if trapping_ineffective(profile, k, n):
        return Mode(0.0, float(s1[0]))
    d = np.diff(s1)
    m = s1.size - 1
    grid = np.linspace(0.0, 1.0, 257)
    dv = m * (bernstein_basis(m - 1, grid) @ d)
    neg = np.nonzero(dv <= 0.0)[0]
    if neg.size == 0:
        z = 1.0
    elif neg[0] == 0:
        z = 0.0
    else:
        lo, hi = grid[neg[0] - 1], grid[neg[0]]
        if dv[neg[0]] == 0.0:
            z = hi
        else:
            z = brentq(lambda u: _derivative(s1, u), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return Mode(float(z), float(_evaluate(s1, z)))


def records_taylor_S1(n: int, z):
    """``S1(0, n; z)`` for the records profile as a Taylor polynomial in ``1-z``."""
    u = 1.0 - np.asarray(z, dtype=float)
    j = np.arange(2, n + 1)
    tail = (u[..., None] ** j / (j * (j - 1.0))).sum(axis=-1)
    return 1.0 - np.asarray(z, dtype=float) - tail


def records_k1_closed_form(n: int, z):
    """``S1(1, n; z)`` for records, by conditioning on the top rank in ``[0, z]``."""
    u = 1.0 - np.asarray(z, dtype=float)
    j = np.arange(2, n)
    tail = ((n - j) * u[..., None] ** j / (n * j * (j - 1.0))).sum(axis=-1)
    return (n - 1.0) * u / n - tail


def records_k1_shifted_form(n: int, z):
    """The same polynomial written as ``S1(0, n; z)`` plus a correction."""
    u = 1.0 - np.asarray(z, dtype=float)
    j = np.arange(1, n)
    corr = (u[..., None] ** (j + 1) / (n * j)).sum(axis=-1)
    return records_taylor_S1(n, z) + corr - u / n


def k1_records_check(n: int, z, atol: float = 1e-12):
    """Evaluate the closed form for ``S1(1, n; z)`` and check it against Bernstein."""
    if n < 2:
        raise ValueError("n must be >= 2")
    from .profiles import records

    closed = records_k1_closed_form(n, z)
    bern = bernstein_S1(records(), 1, n, z)
    err = float(np.max(np.abs(np.asarray(closed) - np.asarray(bern))))
    if err > atol:
        raise NumericalError(f"k=1 closed form differs from Bernstein by {err:.3g}", atol)
    return float(closed) if np.ndim(closed) == 0 else closed
