"""Monte Carlo oracle for the trapping game and stopping strategies.

Paths are simulated from a state ``(t, k)`` by drawing the number ``j`` of
remaining trials from the posterior, placing ``j`` sorted uniforms on
``(t, 1]`` and flagging trial ``k + i`` a success with probability
``p(k + i)``.  Work is split into fixed-size chunks, chunk ``c`` drawing from
``SeedSequence([seed, c])`` (or ``[seed, strategy + 1, c]`` without common
random numbers), so results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from . import discrete
from .bernstein import optimal_z
from .exceptions import InconsistentState
from .priors import GameState, PowerSeriesPrior, check_state, posterior_table, sample_total
from .profiles import Profile

CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class Bygone:
    """Win iff no success follows."""


@dataclass(frozen=True)
class Next:
    """Win iff exactly one success follows."""


@dataclass(frozen=True)
class ZTrap:
    """Trap the final fraction ``1 - z`` of the remaining time."""

    z: float

    def __post_init__(self):
        if not 0.0 <= self.z <= 1.0:
            raise ValueError(f"z = {self.z} outside [0, 1]")


@dataclass(frozen=True)
class Avoid:
    """Win iff the final fraction ``1 - z`` of the remaining time holds no success."""

    z: float

    def __post_init__(self):
        if not 0.0 <= self.z <= 1.0:
            raise ValueError(f"z = {self.z} outside [0, 1]")


@dataclass(frozen=True)
class TrapSet:
    """A union of disjoint real-time intervals ``(a, b]``."""

    intervals: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        iv = sorted(self.intervals)
        for a, b in iv:
            if not 0.0 <= a < b <= 1.0:
                raise ValueError(f"bad trap interval ({a}, {b}]")
        for (a0, b0), (a1, b1) in zip(iv, iv[1:]):
            if a1 < b0:
                raise ValueError("trap intervals overlap")
        object.__setattr__(self, "intervals", tuple(iv))


@dataclass(frozen=True)
class CutoffStop:
    """Stop at the first success epoch ``(s, m)`` with ``s >= c_m``.

    ``cutoffs[m-1]`` is ``c_m``; indices beyond the sequence use ``tail``.
    """

    cutoffs: Tuple[float, ...]
    tail: float

    def table(self, size: int) -> np.ndarray:
        out = np.full(size + 1, float(self.tail))
        n = min(size, len(self.cutoffs))
        out[1:n + 1] = self.cutoffs[:n]
        out[0] = math.inf
        return out


def Myopic(table, q=None) -> CutoffStop:
    """Cutoff strategy from a :class:`~lastsuccess.mixture.CutoffTable`."""
    a = tuple(r.a for r in table.rows)
    return CutoffStop(a, a[-1] if a else 0.0)


INFORMED_OPTIONS = ("bygone", "next", "trap", "stop", "best")


@dataclass(frozen=True)
class InformedOracle:
    """A gambler told the number of remaining trials; ``option`` picks the play."""

    option: str

    def __post_init__(self):
        if self.option not in INFORMED_OPTIONS:
            raise ValueError(f"unknown informed option {self.option!r}")


Strategy = Union[Bygone, Next, ZTrap, Avoid, TrapSet, CutoffStop, InformedOracle]


def parse_strategy(spec: str) -> Strategy:
    """``bygone | next | z:<f> | avoid:<f> | trap:<a,b;c,d> | cutoffs:<file.csv> | informed:<opt>``.

    ``myopic`` needs a cutoff table and is resolved by the caller.
    """
    spec = spec.strip()
    if spec == "bygone":
        return Bygone()
    if spec == "next":
        return Next()
    head, _, body = spec.partition(":")
    try:
        if head == "z":
            return ZTrap(float(body))
        if head == "avoid":
            return Avoid(float(body))
        if head == "trap":
            pairs = []
            for part in body.split(";"):
                a, b = part.split(",")
                pairs.append((float(a), float(b)))
            return TrapSet(tuple(pairs))
        if head == "cutoffs":
            return read_cutoffs(body)
        if head == "informed":
            return InformedOracle(body)
    except (ValueError, OSError) as exc:
        raise ValueError(f"malformed strategy {spec!r}: {exc}") from None
    raise ValueError(f"malformed strategy {spec!r}")


def read_cutoffs(path: str) -> CutoffStop:
    """Read ``k,cutoff`` rows (``#`` comments allowed); the last cutoff is
    repeated for larger indices.  With a header, the column named ``a`` (as
    written by ``lastsuccess cutoffs``) or ``cutoff`` is used, else the last."""
    rows = {}
    col = -1
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                k, c = int(parts[0]), float(parts[col])
            except ValueError:
                for name in ("a", "cutoff"):
                    if name in parts:
                        col = parts.index(name)
                continue
            rows[k] = c
    if not rows:
        raise ValueError(f"no cutoffs in {path}")
    n = max(rows)
    seq = []
    last = 0.0
    for k in range(1, n + 1):
        last = rows.get(k, last)
        seq.append(last)
    return CutoffStop(tuple(seq), seq[-1])


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class GamePath:
    """``n`` trials at increasing times with their success flags (trial ``i`` at ``times[i-1]``)."""

    n: int
    times: np.ndarray
    successes: np.ndarray


def _sorted_uniforms(rng, counts: np.ndarray):
    """Sorted uniforms per segment via normalised exponential spacings."""
    total = int(counts.sum())
    seg = np.repeat(np.arange(counts.size), counts + 1)
    e = rng.standard_exponential(total + counts.size)
    cs = np.cumsum(e)
    ends = np.cumsum(counts + 1) - 1
    base = np.concatenate([[0.0], cs[ends[:-1]]])
    rel = cs - base[seg]
    norm = rel[ends][seg]
    keep = np.ones(cs.size, dtype=bool)
    keep[ends] = False
    return (rel / norm)[keep]


def sample_path(prior: PowerSeriesPrior, profile: Profile, rng: np.random.Generator) -> GamePath:
    """A full path from time 0: ``n`` from the prior, sorted uniform times, successes."""
    n = int(sample_total(prior, rng))
    times = np.sort(rng.random(n))
    while n > 1 and np.any(np.diff(times) <= 0):
        times = np.sort(rng.random(n))
    p = profile.p_array(np.arange(1, n + 1)) if n else np.empty(0)
    succ = rng.random(n) < p
    return GamePath(n, times, succ)


@dataclass
class _Batch:
    """Future trials of many paths, flattened."""

    n_paths: int
    k: int
    t: float
    remaining: np.ndarray     # j per path
    pid: np.ndarray           # path id per trial
    pos: np.ndarray           # 1-based position among future trials
    time: np.ndarray
    succ: np.ndarray


def _sample_batch(prior, profile, state: GameState, x: float, cdf: np.ndarray, size: int,
                  rng: np.random.Generator) -> _Batch:
    u = rng.random(size)
    j = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    t = state.t
    times = t + (1.0 - t) * _sorted_uniforms(rng, j)
    pid = np.repeat(np.arange(size), j)
    starts = np.cumsum(j) - j
    pos = np.arange(pid.size) - starts[pid] + 1
    idx = state.k + pos
    p = profile.p_array(idx) if idx.size else np.empty(0)
    succ = rng.random(pid.size) < p
    return _Batch(size, state.k, t, j, pid, pos, times, succ)


def _per_path(batch: _Batch, mask: np.ndarray) -> np.ndarray:
    return np.bincount(batch.pid[mask], minlength=batch.n_paths)


def _last_success_pos(batch: _Batch) -> np.ndarray:
    out = np.zeros(batch.n_paths, dtype=np.int64)
    s = batch.succ
    np.maximum.at(out, batch.pid[s], batch.pos[s])
    return out


class _InformedCache:
    """Per-``j`` plays of the informed gambler in a fixed state."""

    def __init__(self, profile: Profile, k: int, j_max: int):
        self.k = k
        J = j_max + 1
        s0, s1 = discrete.forward_s(profile, k + 1, k + J - 1)
        M = discrete.s1_matrix(profile, k + 1, J)
        self.stop_value = M.max(axis=0)
        # first index of the best stopping window, as a position (1-based)
        self.stop_pos = M.argmax(axis=0) + 1
        self.s0, self.s1 = s0[:J], s1[:J]
        self.z = np.zeros(J)
        self.trap_value = np.zeros(J)
        for j in range(1, J):
            mode = optimal_z(profile, k, k + j)
            self.z[j], self.trap_value[j] = mode.z, mode.value
        vals = np.vstack([self.s0, self.s1, self.trap_value, self.stop_value])
        self.best = vals.argmax(axis=0)


def _wins(strategy, batch: _Batch, profile: Profile, informed=None) -> np.ndarray:
    succ = batch.succ
    n_succ = _per_path(batch, succ)
    if isinstance(strategy, Bygone):
        return n_succ == 0
    if isinstance(strategy, Next):
        return n_succ == 1
    if isinstance(strategy, (ZTrap, Avoid)):
        edge = batch.t + strategy.z * (1.0 - batch.t)
        in_trap = _per_path(batch, succ & (batch.time > edge))
        return in_trap == 1 if isinstance(strategy, ZTrap) else in_trap == 0
    if isinstance(strategy, TrapSet):
        inside = np.zeros(batch.time.size, dtype=bool)
        for a, b in strategy.intervals:
            inside |= (batch.time > a) & (batch.time <= b)
        in_trap = _per_path(batch, succ & inside)
        last = _last_success_pos(batch)
        sel = succ & inside
        hit = np.zeros(batch.n_paths, dtype=np.int64)
        np.maximum.at(hit, batch.pid[sel], batch.pos[sel])
        last_inside = (hit == last) & (last > 0)
        return (in_trap == 1) & last_inside
    if isinstance(strategy, CutoffStop):
        idx = batch.k + batch.pos
        table = strategy.table(int(idx.max()) if idx.size else 1)
        elig = succ & (batch.time >= table[idx])
        first = np.full(batch.n_paths, np.iinfo(np.int64).max)
        np.minimum.at(first, batch.pid[elig], batch.pos[elig])
        last = _last_success_pos(batch)
        return first == last
    if isinstance(strategy, InformedOracle):
        j = batch.remaining
        opt = strategy.option
        if opt == "best":
            play = informed.best[j]
        else:
            play = np.full(j.size, INFORMED_OPTIONS.index(opt))
        z = informed.z[j]
        edge = batch.t + z * (1.0 - batch.t)
        in_trap = _per_path(batch, succ & (batch.time > edge[batch.pid]))
        from_pos = _per_path(batch, succ & (batch.pos >= informed.stop_pos[j][batch.pid]))
        return np.select([play == 0, play == 1, play == 2, play == 3],
                         [n_succ == 0, n_succ == 1, in_trap == 1, from_pos == 1])
    raise TypeError(f"unknown strategy {strategy!r}")


def evaluate(strategy: Strategy, path: GamePath, state: GameState, profile: Profile = None) -> bool:
    """Whether ``strategy`` played from ``state`` wins on ``path``."""
    before = int(np.count_nonzero(path.times <= state.t))
    if before != state.k:
        raise InconsistentState(f"path has {before} trials by time {state.t}, state says {state.k}")
    fut = path.times > state.t
    j = int(np.count_nonzero(fut))
    batch = _Batch(1, state.k, state.t, np.array([j]), np.zeros(j, dtype=np.int64),
                   np.arange(1, j + 1), path.times[fut], path.successes[fut])
    informed = None
    if isinstance(strategy, InformedOracle):
        if profile is None:
            raise ValueError("informed strategies need the profile")
        informed = _InformedCache(profile, state.k, max(j, 1))
    return bool(_wins(strategy, batch, profile, informed)[0])


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class SimResult:
    trials: int
    wins: int
    estimate: float
    std_error: float
    seed: int

    @classmethod
    def from_counts(cls, trials: int, wins: int, seed: int) -> "SimResult":
        est = wins / trials
        return cls(trials, wins, est, math.sqrt(est * (1.0 - est) / trials), seed)

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        """``|estimate - value| <= sigmas * se`` (se floored at one path's weight)."""
        se = max(self.std_error, 1.0 / self.trials)
        return abs(self.estimate - value) <= sigmas * se


def worker_count() -> int:
    env = os.environ.get("LSL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"LSL_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("LSL_THREADS must be >= 1")
        return n
    return max(1, min(os.cpu_count() or 1, 8))


def estimate_many(strategies: Sequence[Strategy], prior: PowerSeriesPrior, profile: Profile,
                  state: GameState, n_paths: int, seed: int, crn: bool = True,
                  chunk: int = CHUNK, workers: int = None):
    """Estimate several strategies; with ``crn`` they share every path."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    x = check_state(prior, state)
    w = posterior_table(prior, state.k, x)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    n_chunks = -(-n_paths // chunk)
    informed = None
    if any(isinstance(s, InformedOracle) for s in strategies):
        informed = _InformedCache(profile, state.k, cdf.size)

    def run(job):
        c, sidx = job
        size = min(chunk, n_paths - c * chunk)
        key = [seed, c] if sidx is None else [seed, sidx + 1, c]
        rng = np.random.default_rng(np.random.SeedSequence(key))
        batch = _sample_batch(prior, profile, state, x, cdf, size, rng)
        if sidx is None:
            return [int(np.count_nonzero(_wins(s, batch, profile, informed))) for s in strategies]
        return int(np.count_nonzero(_wins(strategies[sidx], batch, profile, informed)))

    workers = worker_count() if workers is None else workers
    if crn:
        jobs = [(c, None) for c in range(n_chunks)]
    else:
        jobs = [(c, i) for i in range(len(strategies)) for c in range(n_chunks)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(run, jobs))
    else:
        outs = [run(j) for j in jobs]
    wins = [0] * len(strategies)
    if crn:
        for o in outs:
            for i, v in enumerate(o):
                wins[i] += v
    else:
        for (c, i), v in zip(jobs, outs):
            wins[i] += v
    return [SimResult.from_counts(n_paths, wv, seed) for wv in wins]


def estimate(strategy: Strategy, prior: PowerSeriesPrior, profile: Profile, state: GameState,
             n_paths: int, seed: int, **kw) -> SimResult:
    """Winning-probability estimate of one strategy."""
    return estimate_many([strategy], prior, profile, state, n_paths, seed, crn=True, **kw)[0]


def sample_remaining(prior: PowerSeriesPrior, state: GameState, n_paths: int, seed: int) -> np.ndarray:
    """Posterior draws of the number of remaining trials, chunked like :func:`estimate`."""
    x = check_state(prior, state)
    cdf = np.cumsum(posterior_table(prior, state.k, x))
    cdf /= cdf[-1]
    out = []
    for c in range(-(-n_paths // CHUNK)):
        size = min(CHUNK, n_paths - c * CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        u = rng.random(size)
        out.append(np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1))
    return np.concatenate(out)
