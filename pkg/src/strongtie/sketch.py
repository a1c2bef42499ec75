"""HyperLogLog sketches and the sketch-based square counter.

Items are hashed with a seeded splitmix64 finaliser; the top
``precision_bits`` bits pick a register and the rank of the remaining bits
is max-accumulated. Estimates use the raw HLL formula with linear counting
for small cardinalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .graph import LayeredGraph, frontier_two

MIN_PRECISION = 4
MAX_PRECISION = 18
DEFAULT_PRECISION = 14
DEFAULT_HASH_SEED = 0x5EED



class IncompatibleSketchError(ValueError):
    pass


def hash64(items, seed: int) -> np.ndarray:
    """Seeded 64-bit avalanche hash of integer items (splitmix64 finaliser)."""
    x = np.asarray(items, dtype=np.uint64).reshape(-1)
    with np.errstate(over="ignore"):
        x = x + np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * np.uint64(0x9E3779B97F4A7C15)
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = x ^ (x >> np.uint64(31))
    return x


def _bit_length(x: np.ndarray) -> np.ndarray:
    """Vectorised ``int.bit_length`` for uint64 arrays."""
    x = x.copy()
    n = np.zeros(x.shape, dtype=np.int64)
    for shift in (32, 16, 8, 4, 2, 1):
        s = np.uint64(shift)
        big = (x >> s) > 0
        n[big] += shift
        x[big] >>= s
    n[x > 0] += 1
    return n


def _alpha(m: int) -> float:
    if m == 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1 + 1.079 / m)


@dataclass
class HllSketch:
    precision_bits: int = DEFAULT_PRECISION
    hash_seed: int = DEFAULT_HASH_SEED
    registers: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not MIN_PRECISION <= self.precision_bits <= MAX_PRECISION:
            raise ValueError(
                f"precision_bits must be in [{MIN_PRECISION}, {MAX_PRECISION}], got {self.precision_bits}"
            )
        if self.registers is None:
            self.registers = np.zeros(1 << self.precision_bits, dtype=np.uint8)

    @property
    def m(self) -> int:
        return 1 << self.precision_bits

    @property
    def max_rank(self) -> int:
        return 64 - self.precision_bits

    def insert(self, item: int) -> "HllSketch":
        return self.insert_many([item])

    def insert_many(self, items: Iterable[int]) -> "HllSketch":
        items = np.fromiter(items, dtype=np.uint64) if not isinstance(items, np.ndarray) else items
        if len(items) == 0:
            return self
        h = hash64(items, self.hash_seed)
        p = self.precision_bits
        idx = (h >> np.uint64(64 - p)).astype(np.int64)
        rest = h & np.uint64((1 << (64 - p)) - 1)
        rank = np.minimum((64 - p) - _bit_length(rest) + 1, self.max_rank).astype(np.uint8)
        np.maximum.at(self.registers, idx, rank)
        return self

    def estimate(self) -> float:
        m = self.m
        regs = self.registers.astype(np.float64)
        raw = _alpha(m) * m * m / np.sum(np.exp2(-regs))
        if raw <= 2.5 * m:
            zeros = int(np.count_nonzero(self.registers == 0))
            if zeros:
                return float(m * np.log(m / zeros))
        return float(raw)

    def copy(self) -> "HllSketch":
        return HllSketch(self.precision_bits, self.hash_seed, self.registers.copy())

    def __eq__(self, other):
        return (
            isinstance(other, HllSketch)
            and self.precision_bits == other.precision_bits
            and self.hash_seed == other.hash_seed
            and np.array_equal(self.registers, other.registers)
        )


def sketch_of(items, precision_bits: int = DEFAULT_PRECISION, hash_seed: int = DEFAULT_HASH_SEED) -> HllSketch:
    return HllSketch(precision_bits, hash_seed).insert_many(np.asarray(list(items), dtype=np.uint64))


def hll_insert(s: HllSketch, item: int) -> HllSketch:
    return s.insert(item)


def _check_compatible(s1: HllSketch, s2: HllSketch) -> None:
    if s1.precision_bits != s2.precision_bits or s1.hash_seed != s2.hash_seed:
        raise IncompatibleSketchError(
            f"cannot combine sketches (p={s1.precision_bits}, seed={s1.hash_seed}) "
            f"and (p={s2.precision_bits}, seed={s2.hash_seed})"
        )


def hll_union(s1: HllSketch, s2: HllSketch) -> HllSketch:
    _check_compatible(s1, s2)
    return HllSketch(s1.precision_bits, s1.hash_seed, np.maximum(s1.registers, s2.registers))


def hll_intersect_estimate(s1: HllSketch, s2: HllSketch) -> float:
    """Inclusion-exclusion estimate of ``|A & B|``, clamped at zero."""
    _check_compatible(s1, s2)
    if np.array_equal(s1.registers, s2.registers):
        return s1.estimate()
    union = hll_union(s1, s2)
    return max(0.0, s1.estimate() + s2.estimate() - union.estimate())


def _square_count(g: LayeredGraph, a: int, intersect: Callable[[int], float]) -> dict[int, float]:
    weak = g.weak_sets()
    B = weak[a]
    C = frontier_two(g, a)
    per_c: dict[int, float] = {}
    out = {}
    for b in sorted(B):
        total = 0.0
        for c in sorted(weak[b] & C):
            if c not in per_c:
                per_c[c] = max(0.0, intersect(c) - 1)
            total += per_c[c]
        out[b] = total
    return out


def approx_square_count(
    g: LayeredGraph,
    a: int,
    precision_bits: int = DEFAULT_PRECISION,
    hash_seed: int = DEFAULT_HASH_SEED,
    exact: bool = False,
) -> dict[int, float]:
    """Approximate weak-graph square-outside counts for every candidate of ``a``.

    Each ``c`` at distance two contributes ``|N(c) & B| - 1`` squares to
    every neighbour ``b`` it touches. With ``exact=True`` the intersection
    is taken on plain sets instead of sketches.
    """
    g._check(a)
    weak = g.weak_sets()
    B = weak[a]
    if exact:
        return _square_count(g, a, lambda c: len(weak[c] & B))
    sk_b = sketch_of(sorted(B), precision_bits, hash_seed)
    return _square_count(
        g, a, lambda c: hll_intersect_estimate(sketch_of(sorted(weak[c]), precision_bits, hash_seed), sk_b)
    )


def exact_weak_square_outside(g: LayeredGraph, a: int) -> dict[int, int]:
    """Count weak paths b -> c -> b' with c at distance two and b' != b in B."""
    weak = g.weak_sets()
    B = weak[a]
    C = frontier_two(g, a)
    out = {}
    for b in sorted(B):
        n = 0
        for c in weak[b]:
            if c not in C:
                continue
            for b2 in weak[c]:
                if b2 != b and b2 in B:
                    n += 1
        out[b] = n
    return out
