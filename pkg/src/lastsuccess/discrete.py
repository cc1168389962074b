"""Fixed-n discrete-time quantities.

``s0(m, n)`` and ``s1(m, n)`` are the probabilities of zero and of exactly one
success among trials ``m..n``.  Exact values use Fraction arithmetic and the
backward recursion

    s1(m, n) = (1 - p_m) s1(m+1, n) + p_m s0(m+1, n),

which stays valid when ``p_1 = 1`` (where the odds ``p/(1-p)`` are infinite).
The float helpers at the bottom of the module build whole tables of the same
quantities with numpy for the random-N series.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Tuple

import numpy as np

from .profiles import Profile

#: largest n accepted by the exact fixed-n routines
MAX_N = 10_000


@dataclass(frozen=True)
class IndexWindow:
    """Trials ``first..last``; empty when ``first > last``."""

    first: int
    last: int

    def __post_init__(self):
        if self.first < 1 or self.last < 0:
            raise ValueError(f"invalid window {self.first}..{self.last}")

    @property
    def empty(self) -> bool:
        return self.first > self.last


def _check_n(n, max_n=MAX_N):
    if n > max_n:
        raise ValueError(f"n = {n} exceeds the exact-arithmetic cap {max_n}")


@lru_cache(maxsize=256)
def _columns(profile: Profile, n: int) -> Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]:
    # index m = 1..n+1 -> position m-1; window m..n
    s0 = [Fraction(0)] * (n + 1)
    s1 = [Fraction(0)] * (n + 1)
    s0[n] = Fraction(1)
    for m in range(n, 0, -1):
        p = profile.p(m)
        s0[m - 1] = (1 - p) * s0[m]
        s1[m - 1] = (1 - p) * s1[m] + p * s0[m]
    return tuple(s0), tuple(s1)


def s0(profile: Profile, w: IndexWindow) -> Fraction:
    """Probability of no success among trials ``w.first..w.last``."""
    if w.empty:
        return Fraction(1)
    _check_n(w.last)
    return _columns(profile, w.last)[0][w.first - 1]


def s1(profile: Profile, w: IndexWindow) -> Fraction:
    """Probability of exactly one success among trials ``w.first..w.last``."""
    if w.empty:
        return Fraction(0)
    _check_n(w.last)
    return _columns(profile, w.last)[1][w.first - 1]


def s1_column(profile: Profile, n: int) -> Tuple[Fraction, ...]:
    """``(s1(1,n), ..., s1(n,n))`` exactly."""
    _check_n(n)
    return _columns(profile, n)[1][:n]


def discrete_mode(profile: Profile, n: int) -> int:
    """Smallest maximiser of ``k -> s1(k, n)`` over ``k = 1..n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    col = s1_column(profile, n)
    best = max(col)
    return col.index(best) + 1


def odds_threshold_index(profile: Profile, n: int) -> int:
    """Smallest ``k`` with ``sum_{i=k+1..n} p_i/(1-p_i) <= 1``.

    For profiles with positive probabilities this coincides with
    :func:`discrete_mode`.
    """
    total = Fraction(0)
    k = n
    while k >= 1:
        # total currently holds the odds sum over k+1..n
        if k == 1:
            return 1
        p = profile.p(k)
        if p == 1:
            return k
        total += p / (1 - p)
        if total > 1:
            return k
        k -= 1
    return 1


class IndexSet(NamedTuple):
    indices: Tuple[int, ...]
    probability: Fraction


def optimal_index_set(profile: Profile, n: int) -> IndexSet:
    """The optimal set ``{k*, ..., n}`` for isolating the last success."""
    k = discrete_mode(profile, n)
    return IndexSet(tuple(range(k, n + 1)), s1(profile, IndexWindow(k, n)))


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def value_monotonicity_sign(profile: Profile, n: int) -> int:
    """Sign of ``max_k s1(k, n) - max_k s1(k, n+1)``."""
    return _sign(max(s1_column(profile, n)) - max(s1_column(profile, n + 1)))


def predicted_monotonicity_sign(profile: Profile, n: int) -> int:
    """Sign of ``p_m - p_{n+1}`` at the last maximiser ``m`` of ``s1(., n)``.

    This is the comparison of the optimal set with the set shifted by one
    index.  It is a heuristic for :func:`value_monotonicity_sign`, not an
    identity: it misses tied modes and profiles whose odds over the optimal
    set sum to less than one, where the extra trial always helps.
    """
    col = s1_column(profile, n)
    best = max(col)
    m = max(i for i, v in enumerate(col, start=1) if v == best)
    return _sign(profile.p(m) - profile.p(n + 1))


# ---------------------------------------------------------------------------
# float tables


def _cumulants(profile: Profile, first: int, last: int):
    """Cumulative ``log(1-p)`` and odds over trials ``first..last``.

    Returned arrays are indexed by ``m - first + 1`` for ``m = first-1..last``
    (entry 0 is the empty prefix).  ``first`` must satisfy ``p(first) < 1``.
    """
    m = np.arange(first, last + 1)
    p = profile.p_array(m) if m.size else np.empty(0)
    logq = np.concatenate([[0.0], np.cumsum(np.log1p(-p))])
    odd = np.concatenate([[0.0], np.cumsum(p / (1.0 - p))])
    return logq, odd


def forward_s(profile: Profile, first: int, n_max: int):
    """``s0(first, n)`` and ``s1(first, n)`` for ``n = first-1, ..., n_max``."""
    size = n_max - first + 2
    if size <= 0:
        return np.ones(0), np.zeros(0)
    if size == 1:
        return np.ones(1), np.zeros(1)
    if float(profile.p(first)) == 1.0:
        # certain success at `first`: s0 vanishes, s1 is the s0 of the rest
        z0, _ = forward_s(profile, first + 1, n_max)
        s0v = np.zeros(size)
        s0v[0] = 1.0
        s1v = np.zeros(size)
        s1v[1:] = z0
        return s0v, s1v
    logq, odd = _cumulants(profile, first, n_max)
    s0v = np.exp(logq)
    return s0v, s0v * odd


def backward_s(profile: Profile, first: int, n: int):
    """``s0(m, n)`` and ``s1(m, n)`` for ``m = first, ..., n+1``."""
    size = n - first + 2
    if size <= 0:
        return np.ones(0), np.zeros(0)
    out0 = np.empty(size)
    out1 = np.empty(size)
    start = first
    if float(profile.p(first)) == 1.0:
        start = first + 1
    logq, odd = _cumulants(profile, start, n)
    s0_tail = np.exp(logq[-1] - logq)          # windows start..n+1
    s1_tail = s0_tail * (odd[-1] - odd)
    off = start - first
    out0[off:] = s0_tail
    out1[off:] = s1_tail
    if off:
        out0[0] = 0.0
        out1[0] = s0_tail[0]
    return out0, out1


def s1_matrix(profile: Profile, first: int, size: int) -> np.ndarray:
    """Matrix ``M[i, j] = s1(first+i, first-1+j)`` for ``0 <= i, j < size``.

    Entries with ``i >= j`` are empty windows and hold 0.
    """
    last = first - 1 + size - 1
    M = np.zeros((size, size))
    if size < 2:
        return M
    start = first
    if float(profile.p(first)) == 1.0:
        start = first + 1
    logq, odd = _cumulants(profile, start, last)
    off = start - first
    # rows i >= off start at m = first + i >= start
    a = np.arange(off, size)[:, None] - off          # prefix index of m-1
    b = np.arange(size)[None, :] - off               # prefix index of n
    valid = b > a
    bb = np.where(valid, b, 0)
    M[off:, :] = np.where(valid, np.exp(logq[bb] - logq[a]) * (odd[bb] - odd[a]), 0.0)
    if off:
        # s1(first, n) = s0(first+1, n)
        j = np.arange(1, size)
        M[0, 1:] = np.exp(logq[j - 1])
    return M
