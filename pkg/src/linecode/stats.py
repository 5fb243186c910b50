"""Binomial proportion estimates with Wilson score intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm


def wilson(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Two-sided Wilson score interval for ``successes`` out of ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes outside [0, n]")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = float(norm.ppf(0.5 + confidence / 2))
    phat = successes / n
    z2n = z * z / n
    centre = (phat + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(phat * (1 - phat) / n + z2n / (4 * n))
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class Proportion:
    hits: int
    trials: int
    lo: float
    hi: float
    confidence: float

    @property
    def value(self) -> float:
        return self.hits / self.trials

    @property
    def half_width(self) -> float:
        return (self.hi - self.lo) / 2


def proportion(hits: int, trials: int, confidence: float = 0.95) -> Proportion:
    lo, hi = wilson(hits, trials, confidence)
    return Proportion(int(hits), int(trials), lo, hi, confidence)
