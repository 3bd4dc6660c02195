"""Binomial interval estimation for Monte Carlo success rates."""

from __future__ import annotations

import math

Z_95 = 1.959963984540054
Z_99 = 2.5758293035489004


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval; valid at 0 or n successes, tight near p ~ 1/e."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def wilson_upper(successes: int, trials: int, z: float = Z_95) -> float:
    return wilson_interval(successes, trials, z)[1]


def wilson_half_width(successes: int, trials: int, z: float = Z_95) -> float:
    lo, hi = wilson_interval(successes, trials, z)
    return (hi - lo) / 2
