"""Data-release mechanisms under study: counting, bit release, noisy counts,
extract/encrypt, two canonical k-anonymizers, and the hash-lift wrapper.

Every mechanism is a pure function of (dataset, query list, generator); trial
workers derive their own generator streams, so instances are freely shareable.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset
from .gf2 import HashParams, hash_eval_bulk, sample_hash
from .predicates import (
    IntervalMembership,
    Pattern,
    PredicateExpr,
    evaluate_bulk,
)

QueryList = Sequence[PredicateExpr]


class MechanismError(ValueError):
    """Raised when a mechanism's input contract is violated."""


@dataclass(frozen=True)
class Counts:
    values: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))


@dataclass(frozen=True)
class NoisyCounts:
    values: tuple
    eps_per_query: float
    total_epsilon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class BitMatrix:
    """Entry (i, j) = q_j(x_i); row order of the dataset is preserved."""

    bits: np.ndarray


@dataclass(frozen=True)
class KeyOrBot:
    key: Optional[int]
    m: int


@dataclass(frozen=True)
class ExtEncOutput:
    key: Optional[int]
    ciphertext: Optional[int]
    m: int


@dataclass(frozen=True)
class PredicateFamily:
    """Released predicates with their matched counts over the generating dataset."""

    members: tuple  # of (PredicateExpr, count)
    dropped: int = 0


@dataclass(frozen=True)
class HashLifted:
    params: HashParams
    inner: "MechanismOutput"


MechanismOutput = Union[Counts, NoisyCounts, BitMatrix, KeyOrBot, ExtEncOutput, PredicateFamily, HashLifted]


def _counts(queries: QueryList, ds: Dataset) -> list[int]:
    return [int(evaluate_bulk(q, ds).sum()) for q in queries]


def count_mech(q: PredicateExpr, ds: Dataset) -> Counts:
    """Exact number of rows satisfying q."""
    return Counts((_counts([q], ds)[0],))


def multi_count_mech(queries: QueryList, ds: Dataset) -> Counts:
    return Counts(tuple(_counts(queries, ds)))


class CountingMechanism:
    """Exact per-query counts, optionally masking counts below a floor to 0."""

    name = "counts"

    def __init__(self, suppress_below: Optional[int] = None):
        self.suppress_below = suppress_below

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> Counts:
        vals = _counts(queries, ds)
        if self.suppress_below is not None:
            vals = [v if v >= self.suppress_below else 0 for v in vals]
        return Counts(tuple(vals))


class CountThresholdBitMechanism:
    """One-bit release: whether the first query's count reaches n/2."""

    name = "count-bit"

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> Counts:
        if not queries:
            raise MechanismError("count-bit needs one query")
        c = _counts([queries[0]], ds)[0]
        return Counts((1 if c >= ds.n / 2 else 0,))


def laplace_noise(rng: np.random.Generator, scale: float, size: int) -> np.ndarray:
    """Inverse-CDF Laplace draws: b*ln(2q) below the median, -b*ln(2-2q) above.

    The uniform draws are clipped away from {0, 1} so the transform stays
    finite; the distortion is far below double precision resolution.
    """
    q = np.clip(rng.random(size), 1e-300, 1.0 - 1e-16)
    return np.where(q < 0.5, scale * np.log(2 * q), -scale * np.log(2.0 - 2 * q))


class LaplaceCountingMechanism:
    """Counts plus independent Laplace(1/eps) noise per query; eps=None means exact."""

    name = "noisy-counts"

    def __init__(self, eps_per_query: Optional[float] = 1.0, suppress_below: Optional[int] = None):
        if eps_per_query is not None and not eps_per_query > 0:
            raise MechanismError("eps_per_query must be positive or None for exact counts")
        self.eps_per_query = eps_per_query
        self.suppress_below = suppress_below

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator):
        vals = _counts(queries, ds)
        if self.eps_per_query is None or math.isinf(self.eps_per_query):
            if self.suppress_below is not None:
                vals = [v if v >= self.suppress_below else 0 for v in vals]
            return Counts(tuple(vals))
        noise = laplace_noise(rng, 1.0 / self.eps_per_query, len(vals))
        noisy = [v + e for v, e in zip(vals, noise)]
        if self.suppress_below is not None:
            noisy = [v if v >= self.suppress_below else 0.0 for v in noisy]
        return NoisyCounts(
            values=tuple(noisy),
            eps_per_query=self.eps_per_query,
            total_epsilon=self.eps_per_query * len(vals),
        )


class PredicateReleaseMechanism:
    """Releases the full evaluation matrix (q_j(x_1), ..., q_j(x_n)) per query."""

    name = "bit-release"

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> BitMatrix:
        cols = [evaluate_bulk(q, ds) for q in queries]
        bits = np.stack(cols, axis=1) if cols else np.zeros((ds.n, 0), dtype=bool)
        return BitMatrix(bits=bits)


def von_neumann_extract(ds: Dataset, m: int) -> KeyOrBot:
    """Debias the least-significant bits of the first n/2 rows pairwise.

    Pairs (x_1, x_2), (x_3, x_4), ... within the extraction half emit the
    first bit of each unequal pair; the key is the first m emitted bits,
    most significant first, or bottom when fewer than m bits come out.
    """
    if ds.n % 2 != 0:
        raise MechanismError("extraction requires an even dataset size")
    half = ds.n // 2
    lsb = (ds.limbs[:half, 0] & np.uint64(1)).astype(np.uint8)
    pairs = half // 2
    first = lsb[0 : 2 * pairs : 2]
    second = lsb[1 : 2 * pairs : 2]
    emitted = first[first != second]
    if emitted.size < m:
        return KeyOrBot(key=None, m=m)
    key = 0
    for b in emitted[:m]:
        key = (key << 1) | int(b)
    return KeyOrBot(key=key, m=m)


class VonNeumannExtractMechanism:
    name = "ext"

    def __init__(self, m: int):
        self.m = m

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> KeyOrBot:
        return von_neumann_extract(ds, self.m)


def ext_enc_mech(ds: Dataset, m: int) -> ExtEncOutput:
    """Key from the extraction half, one-time-pad ciphertext of the last row.

    The pad covers the low m bits of x_n (the whole row in the d = m setting
    the construction is stated for).  A bottom key yields a bottom ciphertext.
    """
    if ds.width < m:
        raise MechanismError("rows must be at least m bits wide")
    out = von_neumann_extract(ds, m)
    if out.key is None:
        return ExtEncOutput(key=None, ciphertext=None, m=m)
    message = ds.value(ds.n - 1) & ((1 << m) - 1)
    return ExtEncOutput(key=out.key, ciphertext=out.key ^ message, m=m)


class ExtractEncryptMechanism:
    name = "ext-enc"

    def __init__(self, m: int):
        self.m = m

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> ExtEncOutput:
        return ext_enc_mech(ds, self.m)


def _family_counts_patterns(ds: Dataset, masks: np.ndarray, vals: np.ndarray) -> np.ndarray:
    hits = (ds.limbs[None, :, :] & masks[:, None, :]) == vals[:, None, :]
    return hits.all(axis=2).sum(axis=1)


def bit_suppress_kanon(ds: Dataset, k: int) -> PredicateFamily:
    """Group rows k at a time in index order; star out every disagreeing bit."""
    if k < 2:
        raise MechanismError("k must be at least 2")
    groups = ds.n // k
    if groups == 0:
        raise MechanismError("dataset smaller than one group")
    dropped = ds.n - groups * k
    limbs = ds.limbs[: groups * k].reshape(groups, k, -1)
    first = limbs[:, 0, :]
    diff = np.zeros_like(first)
    for j in range(1, k):
        diff |= limbs[:, j, :] ^ first
    masks = ~diff  # agree where no row deviates from the first
    # clear bits above the row width in the top limb
    top_bits = ds.width - 64 * (limbs.shape[2] - 1)
    if top_bits < 64:
        masks[:, -1] &= np.uint64((1 << top_bits) - 1)
    vals = first & masks
    counts = _family_counts_patterns(ds, masks, vals)
    members = []
    for g in range(groups):
        mask_int = 0
        val_int = 0
        for j in range(limbs.shape[2] - 1, -1, -1):
            mask_int = (mask_int << 64) | int(masks[g, j])
            val_int = (val_int << 64) | int(vals[g, j])
        members.append((Pattern(mask=mask_int, bits=val_int, width=ds.width), int(counts[g])))
    return PredicateFamily(members=tuple(members), dropped=dropped)


def interval_bucket_kanon(ds: Dataset, k: int) -> PredicateFamily:
    """Sort rows, bucket k at a time, and release [min, max] interval predicates."""
    if k < 2:
        raise MechanismError("k must be at least 2")
    groups = ds.n // k
    if groups == 0:
        raise MechanismError("dataset smaller than one group")
    dropped = ds.n - groups * k
    values = sorted(ds.values())
    members = []
    for g in range(groups):
        chunk = values[g * k : (g + 1) * k]
        lo, hi = chunk[0], chunk[-1]
        count = bisect.bisect_right(values, hi) - bisect.bisect_left(values, lo)
        members.append((IntervalMembership(lo=lo, hi=hi, width=ds.width), count))
    return PredicateFamily(members=tuple(members), dropped=dropped)


class BitSuppressKAnonMechanism:
    name = "kanon-suppress"

    def __init__(self, k: int):
        self.k = k

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> PredicateFamily:
        return bit_suppress_kanon(ds, self.k)


class IntervalBucketKAnonMechanism:
    name = "kanon-interval"

    def __init__(self, k: int):
        self.k = k

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> PredicateFamily:
        return interval_bucket_kanon(ds, self.k)


class HashLiftMechanism:
    """Sample h, hash every row down to m bits, and run the inner mechanism there."""

    def __init__(self, m: int, inner):
        self.m = m
        self.inner = inner
        self.name = f"hash-lift:{inner.name}"

    def run(self, ds: Dataset, queries: QueryList, rng: np.random.Generator) -> HashLifted:
        params = sample_hash(rng, ds.width, self.m)
        hashed = hash_eval_bulk(params, ds.limbs).reshape(-1, 1)
        inner_ds = Dataset(np.ascontiguousarray(hashed), self.m)
        return HashLifted(params=params, inner=self.inner.run(inner_ds, queries, rng))


MECHANISM_NAMES = (
    "counts",
    "noisy-counts",
    "bit-release",
    "ext",
    "ext-enc",
    "kanon-suppress",
    "kanon-interval",
    "count-bit",
    "hash-lift:<inner>",
)


def build_mechanism(name: str, params: dict):
    """Instantiate a registry mechanism from its config name and parameter dict."""
    params = dict(params or {})

    def take(key, default=None, required=False):
        if required and key not in params:
            raise MechanismError(f"mechanism {name!r} requires parameter {key!r}")
        return params.pop(key, default)

    if name.startswith("hash-lift:"):
        inner_name = name.split(":", 1)[1]
        m = take("m", required=True)
        inner_params = take("inner_params", default={})
        mech = HashLiftMechanism(m=int(m), inner=build_mechanism(inner_name, inner_params))
    elif name == "counts":
        mech = CountingMechanism(suppress_below=take("suppress_below"))
    elif name == "noisy-counts":
        eps = take("eps_per_query", default=1.0)
        if isinstance(eps, str):
            eps = None if eps in ("inf", "infinity") else float(eps)
        if eps is not None and math.isinf(eps):
            eps = None
        mech = LaplaceCountingMechanism(eps_per_query=eps, suppress_below=take("suppress_below"))
    elif name == "bit-release":
        mech = PredicateReleaseMechanism()
    elif name == "ext":
        mech = VonNeumannExtractMechanism(m=int(take("m", required=True)))
    elif name == "ext-enc":
        mech = ExtractEncryptMechanism(m=int(take("m", required=True)))
    elif name == "kanon-suppress":
        mech = BitSuppressKAnonMechanism(k=int(take("k", required=True)))
    elif name == "kanon-interval":
        mech = IntervalBucketKAnonMechanism(k=int(take("k", required=True)))
    elif name == "count-bit":
        mech = CountThresholdBitMechanism()
    else:
        raise MechanismError(f"unknown mechanism {name!r}")
    if params:
        raise MechanismError(f"unknown parameters for mechanism {name!r}: {sorted(params)}")
    return mech
