"""Samplable row distributions with computable min-entropy.

Three kinds cover the lab's needs: uniform d-bit strings, per-bit i.i.d.
Bernoulli products, and finite categorical mixtures over explicit support
rows.  Sampling is a pure function of the supplied generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .dataset import Dataset, limbs_for

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class UniformBits:
    width: int


@dataclass(frozen=True)
class BernoulliProduct:
    """Each of the d bits is independently 1 with probability p."""

    width: int
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("per-bit probability must lie in [0, 1]")


@dataclass(frozen=True)
class Categorical:
    support: tuple
    probs: tuple
    width: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(int(v) for v in self.support))
        object.__setattr__(self, "probs", tuple(float(q) for q in self.probs))
        if len(self.support) != len(self.probs) or not self.support:
            raise ValueError("support and probabilities must be equal-length and non-empty")
        if abs(sum(self.probs) - 1.0) > _PROB_TOL:
            raise ValueError("probabilities must sum to 1")
        if any(q < 0 for q in self.probs):
            raise ValueError("probabilities must be non-negative")
        upper = 1 << self.width
        if any(not 0 <= v < upper for v in self.support):
            raise ValueError("support rows must fit the declared width")


Distribution = Union[UniformBits, BernoulliProduct, Categorical]


def dist_width(dist: Distribution) -> int:
    return dist.width


def min_entropy(dist: Distribution) -> float:
    """-log2 of the most probable row."""
    if isinstance(dist, UniformBits):
        return float(dist.width)
    if isinstance(dist, BernoulliProduct):
        pmax = max(dist.p, 1.0 - dist.p)
        if pmax >= 1.0:
            return 0.0
        return -dist.width * math.log2(pmax)
    if isinstance(dist, Categorical):
        return -math.log2(max(dist.probs))
    raise TypeError(f"unknown distribution {type(dist).__name__}")


def _pack_bits_msb_first(bits: np.ndarray, width: int) -> np.ndarray:
    """(n, width) bit matrix, column 0 = most significant bit, to (n, L) limbs."""
    n = bits.shape[0]
    nlimbs = limbs_for(width)
    padded = np.zeros((n, nlimbs * 64), dtype=np.uint8)
    padded[:, :width] = bits[:, ::-1]  # reverse to LSB-first, pad high positions with 0
    packed = np.packbits(padded, axis=1, bitorder="little")
    limbs = packed.view("<u8")
    return np.ascontiguousarray(limbs)


def sample_dataset(dist: Distribution, n: int, rng: np.random.Generator) -> Dataset:
    """n i.i.d. rows from dist; deterministic given the generator state."""
    if n < 1:
        raise ValueError("dataset size must be at least 1")
    d = dist.width
    if isinstance(dist, UniformBits):
        nlimbs = limbs_for(d)
        limbs = np.zeros((n, nlimbs), dtype=np.uint64)
        remaining = d
        for j in range(nlimbs):
            bits = min(64, remaining)
            limbs[:, j] = rng.integers(0, 1 << bits, size=n, dtype=np.uint64, endpoint=False)
            remaining -= bits
        return Dataset(limbs, d)
    if isinstance(dist, BernoulliProduct):
        bits = (rng.random((n, d)) < dist.p).astype(np.uint8)
        return Dataset(_pack_bits_msb_first(bits, d), d)
    if isinstance(dist, Categorical):
        idx = rng.choice(len(dist.support), size=n, p=np.asarray(dist.probs))
        return Dataset.from_ints([dist.support[i] for i in idx], d)
    raise TypeError(f"unknown distribution {type(dist).__name__}")


def distribution_to_json(dist: Distribution) -> dict:
    if isinstance(dist, UniformBits):
        return {"kind": "uniform", "d": dist.width}
    if isinstance(dist, BernoulliProduct):
        return {"kind": "bernoulli", "d": dist.width, "p": dist.p}
    if isinstance(dist, Categorical):
        return {
            "kind": "categorical",
            "d": dist.width,
            "support": [hex(v) for v in dist.support],
            "probs": list(dist.probs),
        }
    raise TypeError(f"unknown distribution {type(dist).__name__}")


def distribution_from_json(obj: dict) -> Distribution:
    kind = obj.get("kind")
    if kind == "uniform":
        return UniformBits(width=int(obj["d"]))
    if kind == "bernoulli":
        return BernoulliProduct(width=int(obj["d"]), p=float(obj["p"]))
    if kind == "categorical":
        support = [int(v, 16) if isinstance(v, str) else int(v) for v in obj["support"]]
        return Categorical(support=tuple(support), probs=tuple(obj["probs"]), width=int(obj["d"]))
    raise ValueError(f"unknown distribution kind {kind!r}")
