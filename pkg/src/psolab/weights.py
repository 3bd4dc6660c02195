"""Predicate weight oracle: weight_D(p) = Pr_{x ~ D}[p(x) = 1].

Three methods, tried in order and recorded on the estimate:

* exact-analytic: closed-form counting.  Under uniform bits this covers all
  leaves plus boolean combinations that reduce to merged bit fixings with at
  most one residual constraint family (an integer interval, a parity target,
  or hash thresholds sharing one parameter set).  Hash conjunctions count
  exactly via GF(2) linear algebra: multiplication by `a` is linear, so the
  hash image of a bit-fixing's solution set is an affine subspace whose
  elements below a cutoff can be counted from an echelon basis.
* exact-enumeration: full domain sweep when 2^d fits the budget, and always
  for categorical distributions (their support is explicit).
* monte-carlo: seeded sampling, recording the sample count and a Wilson 95%
  half-width so downstream admissibility checks can flag boundary straddles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dataset import Dataset
from .distributions import BernoulliProduct, Categorical, Distribution, UniformBits, sample_dataset
from .gf2 import gf_pow2_multiples, hash_eval
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
    evaluate_bulk,
    pred_width,
)
from .stats import wilson_interval

_MAX_DEPTH = 48


@dataclass(frozen=True)
class WeightBudget:
    enumeration: int = 1 << 24
    samples: int = 1 << 16


@dataclass(frozen=True)
class WeightEstimate:
    value: float
    method: str  # exact-analytic | exact-enumeration | monte-carlo
    exact: Fraction | None = None
    samples: int | None = None
    ci_half_width: float | None = None

    def le(self, bound: Fraction) -> bool:
        """Central-value comparison against a class boundary."""
        if self.exact is not None:
            return self.exact <= bound
        return self.value <= float(bound)

    def ge(self, bound: Fraction) -> bool:
        if self.exact is not None:
            return self.exact >= bound
        return self.value >= float(bound)

    def straddles(self, bound: Fraction) -> bool:
        """True when a monte-carlo interval contains the boundary."""
        if self.ci_half_width is None:
            return False
        b = float(bound)
        return self.value - self.ci_half_width <= b <= self.value + self.ci_half_width


def predicate_weight(
    p: PredicateExpr,
    dist: Distribution,
    budget: WeightBudget = WeightBudget(),
    rng: np.random.Generator | None = None,
) -> WeightEstimate:
    d = pred_width(p)
    if d != dist.width:
        raise ValueError(f"predicate width {d} != distribution width {dist.width}")

    if isinstance(dist, Categorical):
        value = sum(q for v, q in zip(dist.support, dist.probs) if evaluate(p, v))
        return WeightEstimate(value=float(value), method="exact-enumeration")

    exact = _analytic_weight(p, dist)
    if exact is not None:
        return WeightEstimate(value=float(exact), method="exact-analytic", exact=exact)

    if (1 << d) <= budget.enumeration:
        return _enumerate_weight(p, dist)

    if rng is None:
        raise ValueError("monte-carlo weight estimation needs a seeded generator")
    n = budget.samples
    hits = int(evaluate_bulk(p, sample_dataset(dist, n, rng)).sum())
    lo, hi = wilson_interval(hits, n)
    return WeightEstimate(
        value=hits / n, method="monte-carlo", samples=n, ci_half_width=(hi - lo) / 2
    )


def _enumerate_weight(p: PredicateExpr, dist: Distribution) -> WeightEstimate:
    d = dist.width
    limbs = np.arange(1 << d, dtype=np.uint64).reshape(-1, 1)
    sat = evaluate_bulk(p, Dataset(limbs, d))
    if isinstance(dist, UniformBits):
        cnt = int(sat.sum())
        frac = Fraction(cnt, 1 << d)
        return WeightEstimate(value=float(frac), method="exact-enumeration", exact=frac)
    # Bernoulli product: weigh satisfying rows by their popcount.
    ones = np.bitwise_count(limbs[sat, 0])
    counts = np.bincount(ones.astype(np.int64), minlength=d + 1)
    pr = dist.p
    value = sum(int(c) * (pr**k) * ((1 - pr) ** (d - k)) for k, c in enumerate(counts) if c)
    return WeightEstimate(value=float(value), method="exact-enumeration")


# -- analytic engine -----------------------------------------------------


def _analytic_weight(p: PredicateExpr, dist: Distribution) -> Fraction | None:
    d = dist.width
    if isinstance(dist, UniformBits):
        cnt = _satcount(p, d, _MAX_DEPTH)
        return None if cnt is None else Fraction(cnt, 1 << d)
    if isinstance(dist, BernoulliProduct):
        return _bern_weight(p, d, Fraction(dist.p), _MAX_DEPTH)
    return None


def _satcount(p: PredicateExpr, d: int, depth: int) -> int | None:
    """Number of d-bit rows satisfying p, or None when no exact route applies."""
    if depth <= 0:
        return None
    if isinstance(p, Not):
        c = _satcount(p.child, d, depth - 1)
        return None if c is None else (1 << d) - c
    if isinstance(p, Or):
        comp = _satcount_conj([(c, True) for c in p.children], d, depth - 1)
        return None if comp is None else (1 << d) - comp
    if isinstance(p, And):
        return _satcount_conj([(c, False) for c in p.children], d, depth - 1)
    return _satcount_conj([(p, False)], d, depth - 1)


def _flatten_conj(atoms: list) -> list | None:
    """Normalize a [(node, negated)] conjunction into leaf-level atoms.

    Negated structural nodes that have simple rewrites are expanded here;
    anything still compound is passed through for the solver to handle by
    subtraction.
    """
    out = []
    stack = list(atoms)
    while stack:
        node, neg = stack.pop()
        if isinstance(node, Not):
            stack.append((node.child, not neg))
        elif isinstance(node, And) and not neg:
            stack.extend((c, False) for c in node.children)
        elif isinstance(node, Or) and neg:
            stack.extend((c, True) for c in node.children)
        elif isinstance(node, Threshold) and neg:
            # not(x < t)  <=>  x >= t
            out.append((IntervalMembership(lo=node.t, hi=(1 << node.width) - 1, width=node.width), False))
        elif isinstance(node, BitTest) and neg:
            out.append((BitTest(index=node.index, value=1 - node.value, width=node.width), False))
        elif isinstance(node, Equality) and neg:
            # x != v  <=>  x < v or x > v
            w = node.width
            out.append(
                (
                    Or(
                        (
                            Threshold(t=node.value, width=w),
                            IntervalMembership(lo=node.value + 1, hi=(1 << w) - 1, width=w),
                        )
                    ),
                    False,
                )
            )
        else:
            out.append((node, neg))
    return out


def _merge_bitfix(mask: int, bits: int, add_mask: int, add_bits: int) -> tuple[int, int] | None:
    if (mask & add_mask) & (bits ^ add_bits):
        return None
    return mask | add_mask, bits | add_bits


def _satcount_conj(raw_atoms: list, d: int, depth: int) -> int | None:
    if depth <= 0:
        return None
    atoms = _flatten_conj(raw_atoms)
    full = (1 << d) - 1

    mask = bits = 0
    lo, hi = 0, full
    parity_target: int | None = None
    hash_params = None
    ylo = 0
    yhi = None
    compounds: list = []

    for node, neg in atoms:
        if isinstance(node, BitTest):
            pos = node.width - node.index
            merged = _merge_bitfix(mask, bits, 1 << pos, node.value << pos)
            if merged is None:
                return 0
            mask, bits = merged
        elif isinstance(node, Pattern) and not neg:
            merged = _merge_bitfix(mask, bits, node.mask, node.bits)
            if merged is None:
                return 0
            mask, bits = merged
        elif isinstance(node, Equality) and not neg:
            merged = _merge_bitfix(mask, bits, full, node.value)
            if merged is None:
                return 0
            mask, bits = merged
        elif isinstance(node, Threshold) and not neg:
            hi = min(hi, node.t - 1)
        elif isinstance(node, IntervalMembership) and not neg:
            lo = max(lo, node.lo)
            hi = min(hi, node.hi)
        elif isinstance(node, IntervalMembership) and neg:
            w = node.width
            compounds.append(
                (
                    Or(
                        (
                            Threshold(t=node.lo, width=w),
                            IntervalMembership(lo=node.hi + 1, hi=full, width=w),
                        )
                        if node.hi < full
                        else (Threshold(t=node.lo, width=w),)
                    ),
                    False,
                )
            )
        elif isinstance(node, Parity):
            want = 0 if neg else 1
            if parity_target is not None and parity_target != want:
                return 0
            parity_target = want
        elif isinstance(node, HashThreshold):
            if hash_params is not None and hash_params != node.params:
                return None
            hash_params = node.params
            hmax = node.max_passing_hash()
            if neg:
                ylo = max(ylo, hmax + 1)
            else:
                yhi = hmax if yhi is None else min(yhi, hmax)
        else:
            compounds.append((node, neg))

    if compounds:
        head, head_neg = compounds[0]
        rest = [(mask_pred(mask, bits, d), False)] if mask else []
        rest += _interval_atoms(lo, hi, d, full)
        if parity_target is not None:
            par = (Parity(width=d), parity_target == 0)
            rest.append(par)
        if hash_params is not None:
            return None  # hash mixed with compounds: give up, let enumeration/MC take it
        rest.extend(compounds[1:])
        if head_neg:
            # |ctx and not X| = |ctx| - |ctx and X|
            base = _satcount_conj(list(rest), d, depth - 1)
            joint = _satcount_conj(rest + [(head, False)], d, depth - 1)
            if base is None or joint is None:
                return None
            return base - joint
        if isinstance(head, Or):
            total = _try_disjoint_or(head, rest, mask, bits, d, depth)
            if total is not None:
                return total
            # |ctx and (B1 or ...)| = |ctx| - |ctx and not B1 and ...|
            base = _satcount_conj(list(rest), d, depth - 1)
            joint = _satcount_conj(rest + [(c, True) for c in head.children], d, depth - 1)
            if base is None or joint is None:
                return None
            return base - joint
        if isinstance(head, And):
            return _satcount_conj(rest + [(c, False) for c in head.children], d, depth - 1)
        return None

    free = d - bin(mask).count("1")
    if hash_params is not None:
        if lo > 0 or hi < full or parity_target is not None:
            return None
        yhi = (1 << hash_params.m) - 1 if yhi is None else yhi
        if ylo > yhi:
            return 0
        return _affine_hash_count(d, mask, bits, hash_params, ylo, yhi)

    if lo > hi:
        return 0
    if lo == 0 and hi == full:
        if parity_target is None:
            return 1 << free
        if free == 0:
            return 1 if bin(bits).count("1") % 2 == parity_target else 0
        return 1 << (free - 1)
    upper = _count_le_fixed(d, hi, mask, bits, parity_target)
    lower = _count_le_fixed(d, lo - 1, mask, bits, parity_target)
    return upper - lower


def mask_pred(mask: int, bits: int, d: int) -> Pattern:
    return Pattern(mask=mask, bits=bits, width=d)


def _interval_atoms(lo: int, hi: int, d: int, full: int) -> list:
    if lo == 0 and hi == full:
        return []
    return [(IntervalMembership(lo=max(lo, 0), hi=min(hi, full), width=d), False)]


def _try_disjoint_or(head: Or, rest: list, mask: int, bits: int, d: int, depth: int) -> int | None:
    """Sum over Or children when they are pairwise-conflicting bit fixings."""
    fixes = []
    for child in head.children:
        flat = _flatten_conj([(child, False)])
        cmask, cbits = 0, 0
        for node, neg in flat:
            if isinstance(node, BitTest):
                pos = node.width - node.index
                merged = _merge_bitfix(cmask, cbits, 1 << pos, node.value << pos)
            elif isinstance(node, Pattern) and not neg:
                merged = _merge_bitfix(cmask, cbits, node.mask, node.bits)
            elif isinstance(node, Equality) and not neg:
                merged = _merge_bitfix(cmask, cbits, (1 << d) - 1, node.value)
            else:
                return None
            if merged is None:
                cmask = cbits = -1  # self-contradictory child: contributes 0
                break
            cmask, cbits = merged
        fixes.append((cmask, cbits, child))
    live = [(m, b, c) for m, b, c in fixes if m != -1]
    for i in range(len(live)):
        for j in range(i + 1, len(live)):
            mi, bi, _ = live[i]
            mj, bj, _ = live[j]
            if not ((mi & mj) & (bi ^ bj)):
                return None  # overlapping pair: not structurally disjoint
    total = 0
    for _, _, child in live:
        part = _satcount_conj(rest + [(child, False)], d, depth - 1)
        if part is None:
            return None
        total += part
    return total


def _count_le_fixed(d: int, bound: int, mask: int, bits: int, parity_target: int | None) -> int:
    """Count x <= bound with the given fixed bits and optional total-parity target."""
    if bound < 0:
        return 0
    bound = min(bound, (1 << d) - 1)
    # Suffix tallies: free positions strictly below i, and parity of fixed bits below i.
    free_below = [0] * (d + 1)
    fixpar_below = [0] * (d + 1)
    for i in range(d):
        free_below[i + 1] = free_below[i] + (0 if (mask >> i) & 1 else 1)
        fixpar_below[i + 1] = fixpar_below[i] ^ ((bits >> i) & 1 if (mask >> i) & 1 else 0)

    total = 0
    prefix_par = 0
    for i in range(d - 1, -1, -1):
        b = (bound >> i) & 1
        fixed = (mask >> i) & 1
        choices = ((bits >> i) & 1,) if fixed else (0, 1)
        for x in choices:
            if x < b:
                f = free_below[i]
                if parity_target is None:
                    total += 1 << f
                else:
                    need = parity_target ^ prefix_par ^ x ^ fixpar_below[i]
                    if f >= 1:
                        total += 1 << (f - 1)
                    elif need == 0:
                        total += 1
        if b in choices:
            prefix_par ^= b
        else:
            return total  # tight path dies
    if parity_target is None or prefix_par == parity_target:
        total += 1
    return total


def _affine_hash_count(
    d: int, mask: int, bits: int, params, ylo: int, yhi: int
) -> int:
    """Count rows with the given fixed bits whose hash lands in [ylo, yhi].

    The row set is the affine space bits + span{e_i : i free}; its hash image
    is base + span{top_m(a * e_i)} with equal-size fibers.
    """
    shift = d - params.m
    base = hash_eval(params, bits)
    cols = gf_pow2_multiples(params.a, d)
    gens = [cols[i] >> shift for i in range(d) if not (mask >> i) & 1]
    free = len(gens)

    rows: dict[int, int] = {}  # leading bit -> echelon row
    for g in gens:
        while g:
            lead = g.bit_length() - 1
            if lead in rows:
                g ^= rows[lead]
            else:
                rows[lead] = g
                break
    ech = [rows[k] for k in sorted(rows, reverse=True)]
    rank = len(ech)
    fiber = 1 << (free - rank)
    hits = _coset_count_le(base, ech, yhi, params.m) - _coset_count_le(base, ech, ylo - 1, params.m)
    return hits * fiber


def _coset_count_le(offset: int, ech: list[int], bound: int, m: int) -> int:
    """Elements of offset + span(ech) that are <= bound; ech has distinct leading bits, descending."""
    if bound < 0:
        return 0
    if bound >= (1 << m) - 1:
        return 1 << len(ech)
    total = 0
    cur = offset
    r = len(ech)
    for idx, row in enumerate(ech):
        lead = row.bit_length() - 1
        high_cur = cur >> (lead + 1)
        high_bound = bound >> (lead + 1)
        if high_cur < high_bound:
            return total + (1 << (r - idx))
        if high_cur > high_bound:
            return total
        bound_bit = (bound >> lead) & 1
        cur_bit = (cur >> lead) & 1
        if bound_bit == 1:
            total += 1 << (r - idx - 1)  # take 0 at this bit, lower rows free
            if cur_bit == 0:
                cur ^= row  # stay tight with the 1 branch
        else:
            if cur_bit == 1:
                cur ^= row  # must take 0 to stay <= bound
    if cur <= bound:
        total += 1
    return total


# -- Bernoulli product ---------------------------------------------------


def _bern_weight(p: PredicateExpr, d: int, pr: Fraction, depth: int) -> Fraction | None:
    if depth <= 0:
        return None
    if isinstance(p, Not):
        w = _bern_weight(p.child, d, pr, depth - 1)
        return None if w is None else 1 - w
    if isinstance(p, Or):
        w = _bern_weight(And(tuple(Not(c) for c in p.children)), d, pr, depth - 1)
        return None if w is None else 1 - w
    if isinstance(p, Parity):
        return (1 - (1 - 2 * pr) ** d) / 2
    atoms = _flatten_conj([(p, False)])
    if atoms is None:
        return None
    mask = bits = 0
    lo, hi = 0, (1 << d) - 1
    for node, neg in atoms:
        if isinstance(node, BitTest):
            pos = node.width - node.index
            merged = _merge_bitfix(mask, bits, 1 << pos, node.value << pos)
        elif isinstance(node, Pattern) and not neg:
            merged = _merge_bitfix(mask, bits, node.mask, node.bits)
        elif isinstance(node, Equality) and not neg:
            merged = _merge_bitfix(mask, bits, (1 << d) - 1, node.value)
        elif isinstance(node, Threshold) and not neg:
            hi = min(hi, node.t - 1)
            continue
        elif isinstance(node, IntervalMembership) and not neg:
            lo = max(lo, node.lo)
            hi = min(hi, node.hi)
            continue
        else:
            return None
        if merged is None:
            return Fraction(0)
        mask, bits = merged
    if lo > hi:
        return Fraction(0)
    full = (1 << d) - 1
    if lo == 0 and hi == full:
        return _bern_fix_prob(d, mask, bits, pr)
    upper = _bern_le_fixed(d, hi, mask, bits, pr)
    lower = _bern_le_fixed(d, lo - 1, mask, bits, pr)
    return upper - lower


def _bern_fix_prob(d: int, mask: int, bits: int, pr: Fraction) -> Fraction:
    ones = bin(bits).count("1")
    zeros = bin(mask).count("1") - ones
    return (pr**ones) * ((1 - pr) ** zeros)


def _bern_le_fixed(d: int, bound: int, mask: int, bits: int, pr: Fraction) -> Fraction:
    """Pr[x <= bound and fixed bits hold] for per-bit Bernoulli(pr) rows."""
    if bound < 0:
        return Fraction(0)
    bound = min(bound, (1 << d) - 1)
    suffix = [Fraction(1)] * (d + 1)  # probability of the fixed bits strictly below i
    for i in range(d):
        q = Fraction(1)
        if (mask >> i) & 1:
            q = pr if (bits >> i) & 1 else 1 - pr
        suffix[i + 1] = suffix[i] * q

    total = Fraction(0)
    prefix = Fraction(1)
    for i in range(d - 1, -1, -1):
        b = (bound >> i) & 1
        fixed = (mask >> i) & 1
        choices = ((bits >> i) & 1,) if fixed else (0, 1)
        for x in choices:
            q = pr if x else 1 - pr
            if x < b:
                total += prefix * q * suffix[i]
        if b in choices:
            prefix *= pr if b else 1 - pr
        else:
            return total
    return total + prefix
