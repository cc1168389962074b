"""Success-probability profiles.

A profile assigns a success probability ``p(k)`` to the trial with index
``k >= 1``.  Three kinds are supported:

* ``records``   -- ``p(k) = 1/k`` (random records model)
* ``karamata``  -- ``p(k) = theta/(theta + k - 1)``
* ``explicit``  -- a finite list ``p(1), ..., p(N)``

Probabilities are kept as :class:`fractions.Fraction` so that the fixed-n
quantities in :mod:`lastsuccess.discrete` can be computed exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Tuple

import numpy as np

RECORDS = "records"
KARAMATA = "karamata"
EXPLICIT = "explicit"


def _as_fraction(value) -> Fraction:
    # floats go through their shortest repr so that 0.3 becomes 3/10
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Profile:
    kind: str
    theta: Optional[Fraction] = None
    probs: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.kind == KARAMATA:
            if self.theta is None or self.theta <= 0:
                raise ValueError("Karamata-Stirling profile needs theta > 0")
        elif self.kind == EXPLICIT:
            if not self.probs:
                raise ValueError("explicit profile needs at least one probability")
            for i, p in enumerate(self.probs, start=1):
                if not 0 <= p <= 1:
                    raise ValueError(f"p({i}) = {p} is not a probability")
                if i > 1 and p == 1:
                    raise ValueError(f"p({i}) = 1 is only allowed for the first trial")
        elif self.kind != RECORDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @property
    def length(self) -> Optional[int]:
        """Number of defined trials, or None for an infinite profile."""
        return len(self.probs) if self.kind == EXPLICIT else None

    def p(self, k: int) -> Fraction:
        """Exact success probability of trial ``k``."""
        if k < 1:
            raise ValueError(f"trial index must be >= 1, got {k}")
        if self.kind == RECORDS:
            return Fraction(1, k)
        if self.kind == KARAMATA:
            return self.theta / (self.theta + k - 1)
        if k > len(self.probs):
            raise IndexError(f"explicit profile has {len(self.probs)} trials, asked for {k}")
        return self.probs[k - 1]

    def p_array(self, indices) -> np.ndarray:
        """Vectorised float probabilities for an array of trial indices."""
        k = np.asarray(indices)
        if k.size and k.min() < 1:
            raise ValueError("trial indices must be >= 1")
        if self.kind == RECORDS:
            return 1.0 / k
        if self.kind == KARAMATA:
            th = float(self.theta)
            return th / (th + k - 1.0)
        n = len(self.probs)
        if k.size and k.max() > n:
            raise IndexError(f"explicit profile has {n} trials, asked for {int(k.max())}")
        table = np.array([0.0] + [float(p) for p in self.probs])
        return table[k]

    def __str__(self):
        if self.kind == RECORDS:
            return "records"
        if self.kind == KARAMATA:
            return f"karamata:{self.theta}"
        return "explicit:" + ",".join(str(p) for p in self.probs)


def records() -> Profile:
    return Profile(RECORDS)


def karamata(theta) -> Profile:
    return Profile(KARAMATA, theta=_as_fraction(theta))


def explicit(probs: Iterable) -> Profile:
    return Profile(EXPLICIT, probs=tuple(_as_fraction(p) for p in probs))


def success_prob(profile: Profile, k: int) -> Fraction:
    return profile.p(k)


def odds(profile: Profile, k: int):
    """Odds ``p/(1-p)`` of trial ``k``; ``math.inf`` when ``p(k) = 1``."""
    p = profile.p(k)
    if p == 1:
        return math.inf
    return p / (1 - p)


def parse_profile(spec: str) -> Profile:
    """Parse ``records``, ``karamata:<theta>`` or ``explicit:<p1,p2,...>``."""
    spec = spec.strip()
    if spec == "records":
        return records()
    head, _, body = spec.partition(":")
    try:
        if head == "karamata" and body:
            return karamata(Fraction(body))
        if head == "explicit" and body:
            return explicit(Fraction(tok) for tok in body.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed profile spec {spec!r}: {exc}") from None
    raise ValueError(f"malformed profile spec {spec!r}")
