"""Rows and datasets of fixed-width bit strings.

Rows are unsigned integers of a shared width d.  Datasets keep their rows in
a (n, L) uint64 limb array, limb 0 least significant, so predicate evaluation
can run vectorized even for d = 128.  Bit positions follow the convention used
throughout the package: bit index 1 is the most significant of the d bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

LIMB_BITS = 64
_MAGIC = b"PSOD"
_VERSION = 1


def limbs_for(width: int) -> int:
    return (width + LIMB_BITS - 1) // LIMB_BITS


def int_to_limbs(value: int, width: int) -> tuple[int, ...]:
    mask = (1 << LIMB_BITS) - 1
    return tuple((value >> (LIMB_BITS * i)) & mask for i in range(limbs_for(width)))


@dataclass(frozen=True)
class Row:
    """A single d-bit record."""

    value: int
    width: int

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError("row width must be positive")
        if not 0 <= self.value < (1 << self.width):
            raise ValueError(f"row value out of range for width {self.width}")

    def bit(self, index: int) -> int:
        """Bit at 1-based index counted from the most significant end."""
        if not 1 <= index <= self.width:
            raise ValueError(f"bit index {index} out of range for width {self.width}")
        return (self.value >> (self.width - index)) & 1


class Dataset:
    """Ordered collection of n rows sharing a width d."""

    __slots__ = ("limbs", "width")

    def __init__(self, limbs: np.ndarray, width: int):
        if limbs.ndim != 2 or limbs.dtype != np.uint64:
            raise ValueError("limbs must be a 2-d uint64 array")
        if limbs.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if limbs.shape[1] != limbs_for(width):
            raise ValueError("limb count does not match width")
        self.limbs = limbs
        self.width = width

    @property
    def n(self) -> int:
        return self.limbs.shape[0]

    @classmethod
    def from_ints(cls, values: Sequence[int] | Iterable[int], width: int) -> "Dataset":
        values = list(values)
        upper = 1 << width
        limbs = np.zeros((len(values), limbs_for(width)), dtype=np.uint64)
        for i, v in enumerate(values):
            if not 0 <= v < upper:
                raise ValueError(f"row {i} out of range for width {width}")
            for j, limb in enumerate(int_to_limbs(v, width)):
                limbs[i, j] = limb
        return cls(limbs, width)

    def value(self, i: int) -> int:
        acc = 0
        for j in range(self.limbs.shape[1] - 1, -1, -1):
            acc = (acc << LIMB_BITS) | int(self.limbs[i, j])
        return acc

    def values(self) -> list[int]:
        return [self.value(i) for i in range(self.n)]

    def rows(self) -> Iterator[Row]:
        for i in range(self.n):
            yield Row(self.value(i), self.width)

    def take(self, indices: np.ndarray | Sequence[int]) -> "Dataset":
        return Dataset(self.limbs[np.asarray(indices)], self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.width == other.width and np.array_equal(self.limbs, other.limbs)

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.width})"

    # -- serialization --------------------------------------------------

    def to_bytes(self) -> bytes:
        nbytes = (self.width + 7) // 8
        header = _MAGIC + struct.pack("<BHQ", _VERSION, self.width, self.n)
        body = b"".join(v.to_bytes(nbytes, "little") for v in self.values())
        return header + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Dataset":
        if blob[:4] != _MAGIC:
            raise ValueError("not a dataset blob")
        version, width, n = struct.unpack("<BHQ", blob[4:15])
        if version != _VERSION:
            raise ValueError(f"unsupported dataset format version {version}")
        nbytes = (width + 7) // 8
        body = blob[15:]
        if len(body) != n * nbytes:
            raise ValueError("dataset blob truncated")
        values = [int.from_bytes(body[i * nbytes : (i + 1) * nbytes], "little") for i in range(n)]
        return cls.from_ints(values, width)

    def to_hex(self) -> str:
        digits = (self.width + 3) // 4
        lines = [f"# d={self.width} n={self.n}"]
        lines += [format(v, f"0{digits}x") for v in self.values()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_hex(cls, text: str) -> "Dataset":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("missing hex dataset header")
        fields = dict(part.split("=") for part in lines[0][1:].split())
        width = int(fields["d"])
        values = [int(ln, 16) for ln in lines[1:]]
        if len(values) != int(fields["n"]):
            raise ValueError("row count does not match header")
        return cls.from_ints(values, width)


def permute_dataset(ds: Dataset, sigma: Sequence[int]) -> Dataset:
    """Reorder rows as (x_{sigma(1)}, ..., x_{sigma(n)}); sigma is 0-based here."""
    perm = np.asarray(sigma)
    if perm.shape != (ds.n,) or not np.array_equal(np.sort(perm), np.arange(ds.n)):
        raise ValueError("sigma is not a permutation of the row indices")
    return Dataset(ds.limbs[perm], ds.width)
