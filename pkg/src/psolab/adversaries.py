"""Attack constructions: counting-composition reconstruction (plain, masked,
repeated), the full row reconstruction from bit release, the extract-and-
encrypt decryption, and the k-anonymity attacks.

Adversaries are pure functions of (mechanism output, generator).  Each one
declares the queries its target mechanism should answer and the weight class
it is claiming, so the harness can score the joint isolate-and-admissible
event exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .baseline import parse_weight_bound, trivial_hash_predicate
from .gf2 import HashParams, sample_hash
from .mechanisms import (
    BitMatrix,
    Counts,
    ExtEncOutput,
    HashLifted,
    KeyOrBot,
    NoisyCounts,
    PredicateFamily,
)
from .predicates import (
    And,
    BitTest,
    Equality,
    HashThreshold,
    IntervalMembership,
    Not,
    Or,
    Parity,
    Pattern,
    PredicateExpr,
    Threshold,
    evaluate,
)


class AdversaryError(ValueError):
    """Raised when an adversary's parameters or inputs are malformed."""


@dataclass(frozen=True)
class AttackOutput:
    predicates: tuple = ()
    aborted: bool = False
    full_pso: bool = False
    info: dict = field(default_factory=dict)


_ABORT = AttackOutput(aborted=True)


@dataclass(frozen=True)
class AdversaryContext:
    """Experiment facts an adversary may rely on."""

    n: int
    d: int
    w_low: Fraction
    w_high: Fraction
    side: str = "low"


# -- counting composition attack ------------------------------------------


def slice_predicate(j: int, n: int, m: int) -> PredicateExpr:
    """The j-th (1-based) weight-floor(2^m/n)/2^m slice of the m-bit domain."""
    s = (1 << m) // n
    if j == 1:
        return Threshold(t=s, width=m)
    return IntervalMembership(lo=(j - 1) * s, hi=j * s - 1, width=m)


def counting_attack_queries(
    n: int, m: int, repetitions: int = 1, bit_queries: bool = True
) -> list[PredicateExpr]:
    """Per repetition: one slice query plus m slice-and-bit conjunctions.

    Repetition 1 is the textbook construction (q0 = x < 2^m/n); later
    repetitions reuse disjoint slices so any isolating slice wins.
    """
    min_m = (n - 1).bit_length() + 1
    if m < min_m:
        raise AdversaryError(f"counting attack needs m >= ceil(log2 n) + 1 = {min_m}")
    if repetitions < 1:
        raise AdversaryError("repetitions must be at least 1")
    s = (1 << m) // n
    if repetitions * s > (1 << m):
        raise AdversaryError(f"at most {(1 << m) // s} disjoint slices exist for n={n}, m={m}")
    queries: list[PredicateExpr] = []
    for j in range(1, repetitions + 1):
        q0 = slice_predicate(j, n, m)
        queries.append(q0)
        if bit_queries:
            queries.extend(And((q0, BitTest(index=i, value=1, width=m))) for i in range(1, m + 1))
    return queries


def _as_rounded_counts(values: Sequence) -> list[int]:
    return [max(0, int(round(float(v)))) for v in values]


def counting_attack_reconstruct(
    counts: Sequence, n: int, m: int, repetitions: int = 1, bit_queries: bool = True
) -> AttackOutput:
    """Rebuild the isolated row of the first slice whose count equals 1.

    Noisy counts are rounded to the nearest integer first; bit counts are then
    clamped to {0, 1}.  The emitted predicate fixes all m bits inside the
    slice, hence has weight at most 2^-m under uniform bits.
    """
    per_rep = (m + 1) if bit_queries else 1
    if len(counts) != repetitions * per_rep:
        raise AdversaryError("count vector does not align with the attack queries")
    vals = _as_rounded_counts(counts)
    for j in range(repetitions):
        y0 = vals[j * per_rep]
        if y0 != 1:
            continue
        q0 = slice_predicate(j + 1, n, m)
        if not bit_queries:
            # Degraded single-count mode: nothing narrower than the slice is known.
            return AttackOutput(predicates=(q0,), info={"repetition": j + 1})
        bits = 0
        for i in range(1, m + 1):
            y = min(1, vals[j * per_rep + i])
            bits = (bits << 1) | y
        p = And((q0, Pattern(mask=(1 << m) - 1, bits=bits, width=m)))
        return AttackOutput(predicates=(p,), info={"repetition": j + 1, "value": bits})
    return _ABORT


def hash_preimage_predicate(params: HashParams, value: int) -> PredicateExpr:
    """h(x) == value, expressed with two threshold predicates on r(h(x))."""
    denom = (1 << params.m) - 1
    le_v = HashThreshold(params=params, bound=Fraction(value, denom), strict=False)
    if value == 0:
        return le_v
    below = HashThreshold(params=params, bound=Fraction(value - 1, denom), strict=False)
    return And((le_v, Not(below)))


def lift_reconstructed_predicate(
    params: HashParams, inner: PredicateExpr, value: int
) -> PredicateExpr:
    """Compose an all-bits-fixed m-bit reconstruction with the sampled hash.

    The inner predicate matches exactly {value} or nothing, so its composition
    with h is either the preimage of value or the empty predicate.
    """
    if evaluate(inner, value):
        return hash_preimage_predicate(params, value)
    ht = HashThreshold(params=params, bound=Fraction(value, (1 << params.m) - 1), strict=False)
    return And((ht, Not(ht)))


class CountingAdversary:
    name = "counting"

    def __init__(self, m: int, repetitions: int = 1, bit_queries: bool = True):
        self.m = m
        self.repetitions = repetitions
        self.bit_queries = bit_queries

    def mechanism_queries(self, ctx: AdversaryContext) -> list[PredicateExpr]:
        return counting_attack_queries(ctx.n, self.m, self.repetitions, self.bit_queries)

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        lift_params = None
        if isinstance(output, HashLifted):
            lift_params = output.params
            output = output.inner
        if not isinstance(output, (Counts, NoisyCounts)):
            raise AdversaryError(f"counting adversary cannot read {type(output).__name__}")
        result = counting_attack_reconstruct(
            output.values, ctx.n, self.m, self.repetitions, self.bit_queries
        )
        if result.aborted or lift_params is None:
            return result
        if not self.bit_queries:
            raise AdversaryError("slice-only reconstruction cannot be hash-lifted")
        lifted = lift_reconstructed_predicate(
            lift_params, result.predicates[0], result.info["value"]
        )
        return AttackOutput(predicates=(lifted,), info=result.info)


# -- masked counting attack ------------------------------------------------


def masked_counting_queries(n: int, m: int, repetitions: int = 1) -> list[PredicateExpr]:
    """(q*, q0 or q*, q1 or q*, ...): every count concentrates near n/2."""
    base = counting_attack_queries(n, m, repetitions, bit_queries=True)
    q_star = Parity(width=m)
    return [q_star] + [Or((q, q_star)) for q in base]


def masked_counting_reconstruct(counts: Sequence, n: int, m: int, repetitions: int = 1) -> AttackOutput:
    vals = _as_rounded_counts(counts)
    per_rep = m + 1
    if len(vals) != 1 + repetitions * per_rep:
        raise AdversaryError("count vector does not align with the masked attack queries")
    c_star = vals[0]
    for j in range(repetitions):
        block = 1 + j * per_rep
        if vals[block] != c_star + 1:
            continue
        q0 = slice_predicate(j + 1, n, m)
        bits = 0
        for i in range(1, m + 1):
            y = min(1, max(0, vals[block + i] - c_star))
            bits = (bits << 1) | y
        p = And(
            (
                q0,
                Pattern(mask=(1 << m) - 1, bits=bits, width=m),
                Not(Parity(width=m)),
            )
        )
        return AttackOutput(predicates=(p,), info={"repetition": j + 1, "value": bits})
    return _ABORT


class MaskedCountingAdversary:
    name = "counting-masked"

    def __init__(self, m: int, repetitions: int = 1):
        self.m = m
        self.repetitions = repetitions

    def mechanism_queries(self, ctx: AdversaryContext) -> list[PredicateExpr]:
        return masked_counting_queries(ctx.n, self.m, self.repetitions)

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if isinstance(output, (Counts, NoisyCounts)):
            return masked_counting_reconstruct(output.values, ctx.n, self.m, self.repetitions)
        raise AdversaryError(f"masked counting adversary cannot read {type(output).__name__}")


# -- full reconstruction from bit release -----------------------------------


def bit_release_queries(m: int) -> list[PredicateExpr]:
    return [BitTest(index=i, value=1, width=m) for i in range(1, m + 1)]


def full_pso_attack(matrix: BitMatrix, m: int) -> AttackOutput:
    """One all-bits-fixed predicate per released row; abort on any collision."""
    bits = np.asarray(matrix.bits, dtype=bool)
    if bits.shape[1] != m:
        raise AdversaryError("bit matrix width does not match m")
    weights = (1 << np.arange(m - 1, -1, -1, dtype=np.uint64)).astype(np.uint64)
    values = (bits.astype(np.uint64) * weights).sum(axis=1)
    if np.unique(values).size != values.size:
        return _ABORT
    full = (1 << m) - 1
    preds = tuple(Pattern(mask=full, bits=int(v), width=m) for v in values)
    return AttackOutput(predicates=preds, full_pso=True)


class FullPsoAdversary:
    name = "full-pso"

    def __init__(self, m: int):
        self.m = m

    def mechanism_queries(self, ctx: AdversaryContext) -> list[PredicateExpr]:
        return bit_release_queries(self.m)

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if not isinstance(output, BitMatrix):
            raise AdversaryError(f"full-pso adversary cannot read {type(output).__name__}")
        return full_pso_attack(output, self.m)


# -- extract-and-encrypt -----------------------------------------------------


def extenc_attack(out: ExtEncOutput, d: int) -> AttackOutput:
    """Decrypt x_n = c xor s and point at it; abort on a bottom component."""
    if out.key is None or out.ciphertext is None:
        return _ABORT
    v = out.key ^ out.ciphertext
    if d == out.m:
        p: PredicateExpr = Equality(value=v, width=d)
    else:
        p = Pattern(mask=(1 << out.m) - 1, bits=v, width=d)
    return AttackOutput(predicates=(p,), info={"value": v})


class ExtEncAdversary:
    name = "ext-enc"

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if isinstance(output, ExtEncOutput):
            return extenc_attack(output, ctx.d)
        if isinstance(output, KeyOrBot):
            # Key-only control: the best available guess decrypts a zero ciphertext.
            if output.key is None:
                return _ABORT
            return extenc_attack(
                ExtEncOutput(key=output.key, ciphertext=0, m=output.m), ctx.d
            )
        raise AdversaryError(f"ext-enc adversary cannot read {type(output).__name__}")

    def mechanism_queries(self, ctx: AdversaryContext):
        return None


# -- k-anonymity attacks ------------------------------------------------------


def closest_dyadic(target: Fraction, m: int) -> Fraction:
    """Multiple of 2^-m closest to target, ties resolved toward the larger one."""
    num = (target * (1 << m) + Fraction(1, 2)).__floor__()
    return Fraction(num, 1 << m)


def kanon_hash_attack(
    family: PredicateFamily, k_max: int, m: int, rng: np.random.Generator, d: int
) -> AttackOutput:
    """Cut the first small-enough released group down to an expected single row."""
    for phi, cnt in family.members:
        if 2 <= cnt <= k_max:
            k_phi = cnt
            w_phi = closest_dyadic(Fraction(1, k_phi), m)
            h = sample_hash(rng, d, m)
            q_h = HashThreshold(params=h, bound=w_phi, strict=True)
            p = And((phi, q_h))
            return AttackOutput(
                predicates=(p,), info={"phi": phi, "k_phi": k_phi, "w_phi": w_phi}
            )
    return _ABORT


class KAnonHashAdversary:
    name = "kanon-hash"

    def __init__(self, m: int, k_max: int):
        self.m = m
        self.k_max = k_max

    def mechanism_queries(self, ctx: AdversaryContext):
        return None

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if not isinstance(output, PredicateFamily):
            raise AdversaryError(f"kanon-hash adversary cannot read {type(output).__name__}")
        return kanon_hash_attack(output, self.k_max, self.m, rng, ctx.d)


def _geq_on_positions(positions: list[int], threshold: int, width: int) -> PredicateExpr:
    """Gathered-bit comparison: the integer formed by the listed 1-based MSB-first
    positions is >= threshold.  Encoded as disjoint conjunctions of bit tests."""
    s = len(positions)
    if threshold <= 0:
        raise AdversaryError("threshold must be positive")
    if threshold > (1 << s) - 1:
        raise AdversaryError("threshold exceeds the gathered-bit range")
    # Strip trailing zero bits of the threshold: low zeros only force the prefix.
    z = (threshold & -threshold).bit_length() - 1
    prefix = threshold >> z
    s_eff = s - z
    terms: list[PredicateExpr] = []
    fixed: list[PredicateExpr] = []
    for b in range(s_eff - 1, -1, -1):
        pos = positions[s_eff - 1 - b]
        tb = (prefix >> b) & 1
        if tb == 0:
            terms.append(And(tuple(fixed + [BitTest(index=pos, value=1, width=width)])))
        fixed.append(BitTest(index=pos, value=tb, width=width))
    terms.append(And(tuple(fixed)))  # exact prefix match; low stripped bits are free
    if len(terms) == 1:
        inner = terms[0]
        return inner.children[0] if len(inner.children) == 1 else inner
    return Or(tuple(terms))


def bitsuppress_direct_attack(family: PredicateFamily, k: int, d: int) -> AttackOutput:
    """Conjoin the first released pattern with a threshold on its starred bits.

    The comparison keeps roughly a 1/k fraction: gathered value >= (1-1/k)*2^s.
    """
    if not family.members:
        return _ABORT
    phi, _cnt = family.members[0]
    if not isinstance(phi, Pattern):
        raise AdversaryError("direct bit-suppression attack needs pattern predicates")
    positions = [idx for idx in range(1, d + 1) if not (phi.mask >> (d - idx)) & 1]
    s = len(positions)
    if s == 0:
        return _ABORT
    threshold = -(-((k - 1) * (1 << s)) // k)  # ceil((1 - 1/k) * 2^s)
    p_k = _geq_on_positions(positions, threshold, d)
    return AttackOutput(predicates=(And((phi, p_k)),), info={"phi": phi, "suppressed": s})


class BitSuppressDirectAdversary:
    name = "kanon-suppress-direct"

    def __init__(self, k: int):
        self.k = k

    def mechanism_queries(self, ctx: AdversaryContext):
        return None

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if not isinstance(output, PredicateFamily):
            raise AdversaryError(f"direct attack cannot read {type(output).__name__}")
        return bitsuppress_direct_attack(output, self.k, ctx.d)


def kanon_endpoint_attack(family: PredicateFamily, d: int) -> AttackOutput:
    """Interval endpoints are verbatim dataset rows: point at the first one."""
    for phi, _cnt in family.members:
        if isinstance(phi, IntervalMembership):
            return AttackOutput(
                predicates=(Equality(value=phi.lo, width=d),), info={"phi": phi}
            )
    return _ABORT


class KAnonEndpointAdversary:
    name = "kanon-endpoint"

    def mechanism_queries(self, ctx: AdversaryContext):
        return None

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        if not isinstance(output, PredicateFamily):
            raise AdversaryError(f"endpoint attack cannot read {type(output).__name__}")
        return kanon_endpoint_attack(output, ctx.d)


# -- trivial adversaries -------------------------------------------------------


class TrivialHashAdversary:
    """Ignores the mechanism entirely; targets a weight near the class boundary."""

    name = "trivial-hash"

    def __init__(self, m: int, w=None, side: str = "low"):
        self.m = m
        self.w = None if w is None else parse_weight_bound(w)
        self.side = side

    def mechanism_queries(self, ctx: AdversaryContext):
        return None

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        w = self.w
        if w is None:
            w = ctx.w_low if self.side == "low" else ctx.w_high
        p = trivial_hash_predicate(rng, ctx.d, self.m, w, self.side)
        return AttackOutput(predicates=(p,))


class EqualityGuessAdversary:
    """Ignores the mechanism; guesses a uniform row value (weight 2^-d)."""

    name = "eq-guess"

    def mechanism_queries(self, ctx: AdversaryContext):
        return None

    def attack(self, output, rng: np.random.Generator, ctx: AdversaryContext) -> AttackOutput:
        v = 0
        remaining = ctx.d
        while remaining > 0:
            bits = min(64, remaining)
            v = (v << bits) | int(rng.integers(0, 1 << bits, dtype=np.uint64, endpoint=False))
            remaining -= bits
        return AttackOutput(predicates=(Equality(value=v, width=ctx.d),))


ADVERSARY_NAMES = (
    "trivial-hash",
    "counting",
    "counting-masked",
    "full-pso",
    "ext-enc",
    "kanon-hash",
    "kanon-suppress-direct",
    "kanon-endpoint",
    "eq-guess",
)


def build_adversary(name: str, params: dict):
    params = dict(params or {})

    def take(key, default=None, required=False):
        if required and key not in params:
            raise AdversaryError(f"adversary {name!r} requires parameter {key!r}")
        return params.pop(key, default)

    if name == "trivial-hash":
        adv = TrivialHashAdversary(
            m=int(take("m", required=True)), w=take("w"), side=take("side", "low")
        )
    elif name == "counting":
        adv = CountingAdversary(
            m=int(take("m", required=True)),
            repetitions=int(take("repetitions", 1)),
            bit_queries=bool(take("bit_queries", True)),
        )
    elif name == "counting-masked":
        adv = MaskedCountingAdversary(
            m=int(take("m", required=True)), repetitions=int(take("repetitions", 1))
        )
    elif name == "full-pso":
        adv = FullPsoAdversary(m=int(take("m", required=True)))
    elif name == "ext-enc":
        adv = ExtEncAdversary()
    elif name == "kanon-hash":
        adv = KAnonHashAdversary(
            m=int(take("m", required=True)), k_max=int(take("k_max", required=True))
        )
    elif name == "kanon-suppress-direct":
        adv = BitSuppressDirectAdversary(k=int(take("k", required=True)))
    elif name == "kanon-endpoint":
        adv = KAnonEndpointAdversary()
    elif name == "eq-guess":
        adv = EqualityGuessAdversary()
    else:
        raise AdversaryError(f"unknown adversary {name!r}")
    if params:
        raise AdversaryError(f"unknown parameters for adversary {name!r}: {sorted(params)}")
    return adv
