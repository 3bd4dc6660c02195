"""The analytic isolation baseline B(n, w) and the hash-based trivial adversary.

B(n, w) = n * w * (1 - w)^(n-1) is the probability that a fixed weight-w
predicate matches exactly one of n i.i.d. rows.  It peaks at w = 1/n and is
evaluated in software multiprecision so tiny weights neither underflow nor
lose the digits the reports promise.

The trivial adversary needs no mechanism output and no knowledge of the row
distribution: it samples a hash h and thresholds r(h(x)) = h(x)/(2^m - 1) so
the predicate weight lands within 3 * 2^-m of a target w whenever the
distribution carries min-entropy at least 5m (probability >= 1 - 2^-m over h).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .gf2 import HashParams, sample_hash
from .predicates import HashThreshold

_DPS = 40


def parse_weight_bound(value) -> Fraction:
    """Accept '1/365', '2^-40', decimal strings, ints, and floats (via decimal repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        s = value.strip()
        if "^" in s:
            base, _, exp = s.partition("^")
            return Fraction(int(base)) ** int(exp)
        return Fraction(s)
    raise ValueError(f"cannot parse weight bound from {value!r}")


def _to_mpf(w) -> mpmath.mpf:
    w = parse_weight_bound(w) if not isinstance(w, (int, float, Fraction)) else w
    if isinstance(w, Fraction):
        return mpmath.mpf(w.numerator) / mpmath.mpf(w.denominator)
    return mpmath.mpf(w)


def b_formula(n: int, w) -> float:
    """B(n, w) = n * w * (1 - w)^(n-1), evaluated at 40 decimal digits."""
    if n < 1:
        raise ValueError("n must be at least 1")
    with mpmath.workdps(_DPS):
        mw = _to_mpf(w)
        if not 0 <= mw <= 1:
            raise ValueError("w must lie in [0, 1]")
        return float(n * mw * (1 - mw) ** (n - 1))


def b_formula_str(n: int, w, digits: int = 12) -> str:
    """B(n, w) rendered to the requested number of significant digits."""
    if n < 1:
        raise ValueError("n must be at least 1")
    with mpmath.workdps(_DPS):
        mw = _to_mpf(w)
        if not 0 <= mw <= 1:
            raise ValueError("w must lie in [0, 1]")
        val = n * mw * (1 - mw) ** (n - 1)
        return mpmath.nstr(val, digits, strip_zeros=False)


@dataclass(frozen=True)
class BaselineQuery:
    n: int
    w_low: Fraction
    w_high: Fraction

    def __post_init__(self) -> None:
        inv_n = Fraction(1, self.n)
        if not (0 <= self.w_low <= inv_n <= self.w_high <= 1):
            raise ValueError("bounds must satisfy 0 <= w_low <= 1/n <= w_high <= 1")


def baseline_upper(q: BaselineQuery) -> tuple[float, float]:
    """(B(n, w_low), B(n, w_high)): upper bounds on the low/high-class baselines."""
    return b_formula(q.n, q.w_low), b_formula(q.n, q.w_high)


class HashWidthError(ValueError):
    """Raised when a weight target is out of reach for the hash output width."""


def _required_m(w: Fraction, side: str) -> int:
    target = w if side == "low" else 1 - w
    m = 1
    while Fraction(1, 1 << (m - 1)) > target:
        m += 1
        if m > 4096:
            raise HashWidthError(f"target weight {w} admits no practical hash width")
    return m


def lhl_predicate(params: HashParams, w, side: str = "low") -> HashThreshold:
    """Threshold predicate on r(h(x)) whose weight concentrates just below (or above) w.

    side='low' uses the cutoff w - 2*2^-m, giving weight in [w - 3*2^-m, w];
    side='high' uses w + 2^-m, giving weight in [w, w + 3*2^-m].  Both hold
    with probability at least 1 - 2^-m over h for distributions with
    min-entropy >= 5m (and exactly, deterministically, for uniform bits).
    """
    w = parse_weight_bound(w)
    m = params.m
    alpha = Fraction(1, 1 << m)
    if side == "low":
        if w < 2 * alpha:
            raise HashWidthError(
                f"side=low needs w >= 2^-(m-1); w={w} requires m >= {_required_m(w, side)}"
            )
        bound = w - 2 * alpha
    elif side == "high":
        if w > 1 - 2 * alpha:
            raise HashWidthError(
                f"side=high needs w <= 1 - 2^-(m-1); w={w} requires m >= {_required_m(w, side)}"
            )
        bound = w + alpha
    else:
        raise ValueError("side must be 'low' or 'high'")
    return HashThreshold(params=params, bound=bound, strict=False)


def trivial_hash_predicate(
    rng: np.random.Generator, d: int, m: int, w, side: str = "low"
) -> HashThreshold:
    """Sample h and return the weight-targeting threshold predicate; ignores everything else."""
    return lhl_predicate(sample_hash(rng, d, m), w, side)


def min_entropy_requirement(m: int) -> float:
    """Min-entropy the concentration guarantee asks of the row distribution."""
    return 5.0 * m


def b_max_ratio(n: int) -> float:
    """B(n, 1/n), the global maximum over w, approaching 1/e from above."""
    return b_formula(n, Fraction(1, n))
