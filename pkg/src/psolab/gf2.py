"""GF(2^d) arithmetic and the 2-universal hash family h_{a,b}(x) = top m bits of a*x + b.

Field elements are unsigned integers whose binary digits are polynomial
coefficients over GF(2).  Each supported width d has one fixed irreducible
reduction polynomial, taken from the standard low-weight table:

    d=8   : x^8   + x^4 + x^3 + x   + 1
    d=16  : x^16  + x^5 + x^3 + x   + 1
    d=32  : x^32  + x^7 + x^3 + x^2 + 1
    d=64  : x^64  + x^4 + x^3 + x   + 1
    d=128 : x^128 + x^7 + x^2 + x   + 1

"First m bits" always means the m most-significant bits of the d-bit value.
With a != 0 the map x -> a*x + b is a bijection, so hashing a uniform d-bit
input yields an exactly uniform m-bit output.  Sampling therefore excludes
a = 0; the family's collision probability becomes (2^(d-m) - 1)/(2^d - 1),
which is below the 2^-m bound the surrounding analysis needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

SUPPORTED_WIDTHS = (8, 16, 32, 64, 128)

# Full reduction polynomials, including the x^d term.
REDUCTION_POLYNOMIALS: dict[int, int] = {
    8: (1 << 8) | 0x1B,
    16: (1 << 16) | 0x2B,
    32: (1 << 32) | 0x8D,
    64: (1 << 64) | 0x1B,
    128: (1 << 128) | 0x87,
}


class FieldWidthError(ValueError):
    """Raised for a bit width outside the supported set."""


def _check_width(d: int) -> None:
    if d not in REDUCTION_POLYNOMIALS:
        raise FieldWidthError(f"unsupported field width {d}; expected one of {SUPPORTED_WIDTHS}")


def gf_mul(a: int, b: int, d: int) -> int:
    """Product of a and b in GF(2^d) under the module's fixed polynomial."""
    _check_width(d)
    if not (0 <= a < (1 << d) and 0 <= b < (1 << d)):
        raise ValueError(f"operands must be {d}-bit field elements")
    poly_low = REDUCTION_POLYNOMIALS[d] & ((1 << d) - 1)
    mask = (1 << d) - 1
    top = 1 << (d - 1)
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        carry = a & top
        a = (a << 1) & mask
        if carry:
            a ^= poly_low
    return acc


def gf_pow2_multiples(a: int, d: int) -> list[int]:
    """[a * x^i mod poly for i in range(d)], i.e. the columns of the multiply-by-a matrix."""
    _check_width(d)
    poly_low = REDUCTION_POLYNOMIALS[d] & ((1 << d) - 1)
    mask = (1 << d) - 1
    top = 1 << (d - 1)
    cols = []
    v = a
    for _ in range(d):
        cols.append(v)
        carry = v & top
        v = (v << 1) & mask
        if carry:
            v ^= poly_low
    return cols


@dataclass(frozen=True)
class HashParams:
    """Parameters of h_{a,b}(x) = first m bits of a*x + b over GF(2^d)."""

    a: int
    b: int
    m: int
    d: int

    def __post_init__(self) -> None:
        _check_width(self.d)
        if not 1 <= self.m <= self.d:
            raise ValueError(f"output width m={self.m} must satisfy 1 <= m <= d={self.d}")
        if not 0 < self.a < (1 << self.d):
            raise ValueError("multiplier a must be a nonzero field element")
        if not 0 <= self.b < (1 << self.d):
            raise ValueError("offset b must be a field element")

    def to_json(self) -> dict:
        return {"a": hex(self.a), "b": hex(self.b), "m": self.m, "d": self.d}

    @classmethod
    def from_json(cls, obj: dict) -> "HashParams":
        return cls(a=int(obj["a"], 16), b=int(obj["b"], 16), m=int(obj["m"]), d=int(obj["d"]))


def hash_eval(params: HashParams, x: int) -> int:
    """The m most-significant bits of gf_mul(a, x) XOR b."""
    if not 0 <= x < (1 << params.d):
        raise ValueError(f"input must be a {params.d}-bit value")
    return (gf_mul(params.a, x, params.d) ^ params.b) >> (params.d - params.m)


def sample_hash(rng: np.random.Generator, d: int, m: int) -> HashParams:
    """Draw a uniform in {1, ..., 2^d - 1} and b uniform in {0, ..., 2^d - 1}.

    Consumes exactly one (a) plus one (b) draw per limb, in that order, so the
    result is a pure function of the generator state.
    """
    _check_width(d)
    if not 1 <= m <= d:
        raise FieldWidthError(f"output width m={m} must satisfy 1 <= m <= d={d}")
    a = _draw_field_element(rng, d)
    while a == 0:
        a = _draw_field_element(rng, d)
    b = _draw_field_element(rng, d)
    return HashParams(a=a, b=b, m=m, d=d)


def _draw_field_element(rng: np.random.Generator, d: int) -> int:
    if d <= 64:
        return int(rng.integers(0, 1 << d, dtype=np.uint64, endpoint=False))
    lo = int(rng.integers(0, 1 << 64, dtype=np.uint64, endpoint=False))
    hi = int(rng.integers(0, 1 << (d - 64), dtype=np.uint64, endpoint=False))
    return (hi << 64) | lo


@njit(cache=True)
def _hash_eval_u64(a0, b0, xs, width, m, poly_low):  # pragma: no cover - jitted
    n = xs.shape[0]
    out = np.empty(n, np.uint64)
    one = np.uint64(1)
    top = one << np.uint64(width - 1)
    if width == 64:
        mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    else:
        mask = (one << np.uint64(width)) - one
    shift = np.uint64(width - m)
    for i in range(n):
        a = a0
        x = xs[i]
        acc = np.uint64(0)
        while x != np.uint64(0):
            if x & one:
                acc ^= a
            x >>= one
            carry = a & top
            a = (a << one) & mask
            if carry:
                a ^= poly_low
        out[i] = (acc ^ b0) >> shift
    return out


@njit(cache=True)
def _hash_eval_u128(a_hi0, a_lo0, b_hi, xs_hi, xs_lo, m, poly_low):  # pragma: no cover - jitted
    # Returns the top m <= 64 bits of (a*x) ^ b; only the high limb of b matters.
    n = xs_hi.shape[0]
    out = np.empty(n, np.uint64)
    one = np.uint64(1)
    s63 = np.uint64(63)
    shift = np.uint64(64 - m)
    for i in range(n):
        ah = a_hi0
        al = a_lo0
        acc_hi = np.uint64(0)
        for j in range(128):
            if j < 64:
                bit = (xs_lo[i] >> np.uint64(j)) & one
            else:
                bit = (xs_hi[i] >> np.uint64(j - 64)) & one
            if bit:
                acc_hi ^= ah
            carry = ah >> s63
            ah = (ah << one) | (al >> s63)
            al = al << one
            if carry:
                al ^= poly_low
        out[i] = (acc_hi ^ b_hi) >> shift
    return out


def hash_eval_bulk(params: HashParams, limbs: np.ndarray) -> np.ndarray:
    """Vectorized hash_eval over rows given as a (n, L) little-endian uint64 limb array.

    Only m <= 64 is supported here (every construction in this package stays
    within that); wider outputs would not fit a uint64 result column.
    """
    if params.m > 64:
        raise ValueError("bulk hash evaluation supports m <= 64 only")
    poly_low = REDUCTION_POLYNOMIALS[params.d] & ((1 << params.d) - 1)
    if params.d <= 64:
        return _hash_eval_u64(
            np.uint64(params.a),
            np.uint64(params.b),
            np.ascontiguousarray(limbs[:, 0]),
            params.d,
            params.m,
            np.uint64(poly_low),
        )
    mask64 = (1 << 64) - 1
    return _hash_eval_u128(
        np.uint64(params.a >> 64),
        np.uint64(params.a & mask64),
        np.uint64(params.b >> 64),
        np.ascontiguousarray(limbs[:, 1]),
        np.ascontiguousarray(limbs[:, 0]),
        params.m,
        np.uint64(poly_low & mask64),
    )
