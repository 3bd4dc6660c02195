"""Predicate AST over fixed-width bit-string rows.

Leaves: threshold (x < t), bit test, equality, ternary pattern, inclusive
interval, parity of all bits, and hash threshold r(h(x)) <= w with
r(y) = y / (2^m - 1).  Combinators: and / or / not.  Bit index 1 is the most
significant bit, matching the "first m bits" convention of the hash family.

Evaluation comes in two forms: scalar over Python ints and vectorized over a
Dataset's limb array.  Conjunctions evaluate left to right on the surviving
subset, so cheap structural conjuncts can gate expensive hash evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .dataset import LIMB_BITS, Dataset, int_to_limbs, limbs_for
from .gf2 import HashParams, hash_eval, hash_eval_bulk


class PredicateError(ValueError):
    """Raised for malformed predicates or width mismatches."""


@dataclass(frozen=True)
class Threshold:
    """x < t (values treated as unsigned integers)."""

    t: int
    width: int


@dataclass(frozen=True)
class BitTest:
    """Bit `index` (1 = most significant) equals `value`."""

    index: int
    value: int
    width: int

    def __post_init__(self) -> None:
        if not 1 <= self.index <= self.width:
            raise PredicateError(f"bit index {self.index} out of range for width {self.width}")
        if self.value not in (0, 1):
            raise PredicateError("bit value must be 0 or 1")


@dataclass(frozen=True)
class Equality:
    value: int
    width: int


@dataclass(frozen=True)
class Pattern:
    """Fixed bits where `mask` is 1 must equal the corresponding bit of `bits`."""

    mask: int
    bits: int
    width: int

    def __post_init__(self) -> None:
        if self.bits & ~self.mask:
            raise PredicateError("pattern bits set outside the fixed mask")

    @classmethod
    def from_string(cls, s: str) -> "Pattern":
        s = s.replace("⋆", "*")  # accept the star glyph
        mask = bits = 0
        for ch in s:
            mask <<= 1
            bits <<= 1
            if ch == "1":
                mask |= 1
                bits |= 1
            elif ch == "0":
                mask |= 1
            elif ch != "*":
                raise PredicateError(f"pattern characters must be 0/1/*, got {ch!r}")
        return cls(mask=mask, bits=bits, width=len(s))

    def to_string(self) -> str:
        out = []
        for i in range(self.width - 1, -1, -1):
            if (self.mask >> i) & 1:
                out.append("1" if (self.bits >> i) & 1 else "0")
            else:
                out.append("*")
        return "".join(out)

    @property
    def fixed_count(self) -> int:
        return bin(self.mask).count("1")


@dataclass(frozen=True)
class IntervalMembership:
    """lo <= x <= hi, inclusive on both ends."""

    lo: int
    hi: int
    width: int


@dataclass(frozen=True)
class Parity:
    """XOR of all width bits."""

    width: int


@dataclass(frozen=True)
class HashThreshold:
    """r(h(x)) <= bound (or < when strict), with r(y) = y / (2^m - 1)."""

    params: HashParams
    bound: Fraction
    strict: bool = False

    @property
    def width(self) -> int:
        return self.params.d

    def max_passing_hash(self) -> int:
        """Largest hash output y satisfying the bound, or -1 when none do."""
        m = self.params.m
        t = self.bound * ((1 << m) - 1)
        if self.strict:
            # y < t  <=>  y <= ceil(t) - 1
            hmax = -((-t.numerator) // t.denominator) - 1
        else:
            hmax = t.numerator // t.denominator
        return max(-1, min(hmax, (1 << m) - 1))

    def passing_count(self) -> int:
        """Number of m-bit hash outputs satisfying the bound."""
        return self.max_passing_hash() + 1


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Not:
    child: "PredicateExpr"


PredicateExpr = Union[
    Threshold, BitTest, Equality, Pattern, IntervalMembership, Parity, HashThreshold, And, Or, Not
]

_LEAF_TYPES = (Threshold, BitTest, Equality, Pattern, IntervalMembership, Parity, HashThreshold)


def pred_width(p: PredicateExpr) -> int:
    if isinstance(p, _LEAF_TYPES):
        return p.width
    if isinstance(p, Not):
        return pred_width(p.child)
    widths = {pred_width(c) for c in p.children}
    if len(widths) != 1:
        raise PredicateError(f"mixed leaf widths in combinator: {sorted(widths)}")
    return widths.pop()


def evaluate(p: PredicateExpr, x: int) -> bool:
    """Scalar predicate evaluation on a width-matching row value."""
    if isinstance(p, Threshold):
        return x < p.t
    if isinstance(p, BitTest):
        return ((x >> (p.width - p.index)) & 1) == p.value
    if isinstance(p, Equality):
        return x == p.value
    if isinstance(p, Pattern):
        return (x & p.mask) == p.bits
    if isinstance(p, IntervalMembership):
        return p.lo <= x <= p.hi
    if isinstance(p, Parity):
        return bin(x).count("1") % 2 == 1
    if isinstance(p, HashThreshold):
        return hash_eval(p.params, x) <= p.max_passing_hash()
    if isinstance(p, And):
        return all(evaluate(c, x) for c in p.children)
    if isinstance(p, Or):
        return any(evaluate(c, x) for c in p.children)
    if isinstance(p, Not):
        return not evaluate(p.child, x)
    raise PredicateError(f"unknown predicate node {type(p).__name__}")


def _le_bound(limbs: np.ndarray, bound: int, width: int) -> np.ndarray:
    """x <= bound, vectorized over the limb array."""
    if bound < 0:
        return np.zeros(limbs.shape[0], dtype=bool)
    if bound >= (1 << width) - 1:
        return np.ones(limbs.shape[0], dtype=bool)
    bnd = int_to_limbs(bound, width)
    lt = np.zeros(limbs.shape[0], dtype=bool)
    eq = np.ones(limbs.shape[0], dtype=bool)
    for j in range(limbs.shape[1] - 1, -1, -1):
        bj = np.uint64(bnd[j])
        lt |= eq & (limbs[:, j] < bj)
        eq &= limbs[:, j] == bj
    return lt | eq


def _masked_equal(limbs: np.ndarray, mask: int, bits: int, width: int) -> np.ndarray:
    out = np.ones(limbs.shape[0], dtype=bool)
    mask_limbs = int_to_limbs(mask, width)
    bit_limbs = int_to_limbs(bits, width)
    for j in range(limbs.shape[1]):
        if mask_limbs[j]:
            out &= (limbs[:, j] & np.uint64(mask_limbs[j])) == np.uint64(bit_limbs[j])
    return out


def evaluate_bulk(p: PredicateExpr, ds: Dataset) -> np.ndarray:
    """Boolean match vector of p over every dataset row."""
    if pred_width(p) != ds.width:
        raise PredicateError(f"predicate width {pred_width(p)} != dataset width {ds.width}")
    return _bulk(p, ds.limbs, ds.width)


def _bulk(p: PredicateExpr, limbs: np.ndarray, width: int) -> np.ndarray:
    n = limbs.shape[0]
    if isinstance(p, Threshold):
        return _le_bound(limbs, p.t - 1, width)
    if isinstance(p, BitTest):
        pos = width - p.index
        col = limbs[:, pos // LIMB_BITS]
        bit = (col >> np.uint64(pos % LIMB_BITS)) & np.uint64(1)
        return bit == np.uint64(p.value)
    if isinstance(p, Equality):
        return _masked_equal(limbs, (1 << width) - 1, p.value, width)
    if isinstance(p, Pattern):
        return _masked_equal(limbs, p.mask, p.bits, width)
    if isinstance(p, IntervalMembership):
        return _le_bound(limbs, p.hi, width) & ~_le_bound(limbs, p.lo - 1, width)
    if isinstance(p, Parity):
        acc = np.zeros(n, dtype=np.uint64)
        for j in range(limbs.shape[1]):
            acc ^= np.bitwise_count(limbs[:, j]).astype(np.uint64)
        return (acc & np.uint64(1)).astype(bool)
    if isinstance(p, HashThreshold):
        hmax = p.max_passing_hash()
        if hmax < 0:
            return np.zeros(n, dtype=bool)
        if hmax >= (1 << p.params.m) - 1:
            return np.ones(n, dtype=bool)
        return hash_eval_bulk(p.params, limbs) <= np.uint64(hmax)
    if isinstance(p, And):
        out = _bulk(p.children[0], limbs, width)
        for c in p.children[1:]:
            live = np.flatnonzero(out)
            if live.size == 0:
                break
            out[live] &= _bulk(c, limbs[live], width)
        return out
    if isinstance(p, Or):
        out = _bulk(p.children[0], limbs, width)
        for c in p.children[1:]:
            dead = np.flatnonzero(~out)
            if dead.size == 0:
                break
            out[dead] |= _bulk(c, limbs[dead], width)
        return out
    if isinstance(p, Not):
        return ~_bulk(p.child, limbs, width)
    raise PredicateError(f"unknown predicate node {type(p).__name__}")


def match_count(p: PredicateExpr, ds: Dataset) -> int:
    return int(evaluate_bulk(p, ds).sum())


def isolates(p: PredicateExpr, ds: Dataset) -> bool:
    """True iff exactly one dataset row satisfies p."""
    return match_count(p, ds) == 1


# -- JSON serialization -------------------------------------------------


def predicate_to_json(p: PredicateExpr) -> dict:
    if isinstance(p, Threshold):
        return {"kind": "threshold", "width": p.width, "t": hex(p.t)}
    if isinstance(p, BitTest):
        return {"kind": "bit", "width": p.width, "index": p.index, "value": p.value}
    if isinstance(p, Equality):
        return {"kind": "eq", "width": p.width, "value": hex(p.value)}
    if isinstance(p, Pattern):
        return {"kind": "pattern", "width": p.width, "pattern": p.to_string()}
    if isinstance(p, IntervalMembership):
        return {"kind": "interval", "width": p.width, "lo": hex(p.lo), "hi": hex(p.hi)}
    if isinstance(p, Parity):
        return {"kind": "parity", "width": p.width}
    if isinstance(p, HashThreshold):
        return {
            "kind": "hash-threshold",
            "params": p.params.to_json(),
            "bound": {"num": str(p.bound.numerator), "den": str(p.bound.denominator)},
            "strict": p.strict,
        }
    if isinstance(p, And):
        return {"kind": "and", "children": [predicate_to_json(c) for c in p.children]}
    if isinstance(p, Or):
        return {"kind": "or", "children": [predicate_to_json(c) for c in p.children]}
    if isinstance(p, Not):
        return {"kind": "not", "child": predicate_to_json(p.child)}
    raise PredicateError(f"unknown predicate node {type(p).__name__}")


def predicate_from_json(obj: dict) -> PredicateExpr:
    kind = obj["kind"]
    if kind == "threshold":
        return Threshold(t=int(obj["t"], 16), width=obj["width"])
    if kind == "bit":
        return BitTest(index=obj["index"], value=obj["value"], width=obj["width"])
    if kind == "eq":
        return Equality(value=int(obj["value"], 16), width=obj["width"])
    if kind == "pattern":
        pat = Pattern.from_string(obj["pattern"])
        if pat.width != obj["width"]:
            raise PredicateError("pattern string length does not match width")
        return pat
    if kind == "interval":
        return IntervalMembership(lo=int(obj["lo"], 16), hi=int(obj["hi"], 16), width=obj["width"])
    if kind == "parity":
        return Parity(width=obj["width"])
    if kind == "hash-threshold":
        return HashThreshold(
            params=HashParams.from_json(obj["params"]),
            bound=Fraction(int(obj["bound"]["num"]), int(obj["bound"]["den"])),
            strict=obj["strict"],
        )
    if kind == "and":
        return And(tuple(predicate_from_json(c) for c in obj["children"]))
    if kind == "or":
        return Or(tuple(predicate_from_json(c) for c in obj["children"]))
    if kind == "not":
        return Not(predicate_from_json(obj["child"]))
    raise PredicateError(f"unknown predicate kind {kind!r}")
