"""Ego-network scores for strong-tie candidates.

For a focal node ``a`` with weak neighbours ``B`` and distance-two nodes
``C``, every candidate ``b`` in ``B`` gets the full score vector below.
Cycle-based scores count *ordered* interior paths whose edges not touching
``a`` are strong; edges incident to ``a`` only need to be weak.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from .graph import LayeredGraph, bfs_distances, frontier_two


class ContractError(ValueError):
    """A scorer was called on a pair that is not a weak edge."""


class NoCandidatesError(ValueError):
    pass


class RankDirection(enum.Enum):
    MINIMIZE = "minimization"
    MAXIMIZE = "maximization"


@dataclass(frozen=True)
class CandidateScores:
    candidate: int
    degree: int
    embeddedness: int
    adamic_adar: float
    h1: float
    triangle: int
    square_in: int
    square_out: int
    pent_in: int
    pent_out: int

    def as_tuple(self) -> tuple:
        return astuple(self)


SCORE_NAMES = tuple(f.name for f in fields(CandidateScores) if f.name != "candidate")

DIRECTIONS = {
    "degree": RankDirection.MINIMIZE,
    "embeddedness": RankDirection.MAXIMIZE,
    "adamic_adar": RankDirection.MAXIMIZE,
    "h1": RankDirection.MINIMIZE,
    "triangle": RankDirection.MAXIMIZE,
    "square_in": RankDirection.MAXIMIZE,
    "square_out": RankDirection.MAXIMIZE,
    "pent_in": RankDirection.MAXIMIZE,
    "pent_out": RankDirection.MAXIMIZE,
}

# scores where 0 means "no evidence" even under minimization
ZERO_WORST = frozenset({"h1"})


class Ego:
    """Precomputed neighbourhood of a focal node, shared by all candidate scorers.

    With ``mask_focal`` the strong flags of edges incident to ``a`` are
    ignored, which is how training nodes are scored so they look like test
    nodes (whose strong edges are hidden).
    """

    def __init__(self, g: LayeredGraph, a: int, mask_focal: bool = False):
        self.g = g
        self.a = a
        self.mask_focal = mask_focal
        weak = g.weak_sets()
        strong = g.strong_sets()
        self.B = weak[a]
        self.C = frontier_two(g, a)
        self._weak = weak
        self._strong = strong
        self._sb: dict[int, frozenset] = {}
        self._sc: dict[int, frozenset] = {}

    def _require(self, b: int) -> None:
        if b not in self.B:
            raise ContractError(f"{b} is not a weak neighbour of {self.a}")

    def strong_in_B(self, v: int) -> frozenset:
        s = self._sb.get(v)
        if s is None:
            s = self._sb[v] = self._strong[v] & self.B
        return s

    def strong_in_C(self, v: int) -> frozenset:
        s = self._sc.get(v)
        if s is None:
            s = self._sc[v] = self._strong[v] & self.C
        return s

    def degree(self, b: int) -> int:
        self._require(b)
        return len(self._weak[b])

    def strong_degree(self, b: int) -> int:
        d = len(self._strong[b])
        if self.mask_focal and self.a in self._strong[b]:
            d -= 1
        return d

    def embeddedness(self, b: int) -> int:
        self._require(b)
        return len(self._weak[b] & self.B)

    def adamic_adar(self, b: int) -> float:
        self._require(b)
        total = 0.0
        for v in sorted(self._weak[b] & self.B):
            d = len(self._weak[v])
            assert d >= 2, "a mutual neighbour always has degree >= 2"
            total += 1.0 / math.log(d)
        return total

    def h1(self, b: int) -> float:
        self._require(b)
        return float(len(self._weak[b])) if self.strong_degree(b) > 0 else 0.0

    def triangle(self, b: int) -> int:
        self._require(b)
        return len(self.strong_in_B(b))

    def square_in(self, b: int) -> int:
        self._require(b)
        return sum(len(self.strong_in_B(x)) - (b in self.strong_in_B(x)) for x in self.strong_in_B(b))

    def square_out(self, b: int) -> int:
        self._require(b)
        return sum(len(self.strong_in_B(c)) - (b in self.strong_in_B(c)) for c in self.strong_in_C(b))

    def pent_in(self, b: int) -> int:
        self._require(b)
        total = 0
        for x in self.strong_in_B(b):
            for y in self.strong_in_B(x):
                if y == b:
                    continue
                zs = self.strong_in_B(y)
                total += len(zs) - (b in zs) - (x in zs)
        return total

    def pent_out(self, b: int) -> int:
        self._require(b)
        total = 0
        for x in self.strong_in_C(b):
            for y in self.strong_in_C(x):
                zs = self.strong_in_B(y)
                total += len(zs) - (b in zs)
        return total

    def scores(self, b: int) -> CandidateScores:
        return CandidateScores(
            candidate=b,
            degree=self.degree(b),
            embeddedness=self.embeddedness(b),
            adamic_adar=self.adamic_adar(b),
            h1=self.h1(b),
            triangle=self.triangle(b),
            square_in=self.square_in(b),
            square_out=self.square_out(b),
            pent_in=self.pent_in(b),
            pent_out=self.pent_out(b),
        )


def score_all(g: LayeredGraph, a: int, mask_focal: bool = False) -> list[CandidateScores]:
    """Score every weak neighbour of ``a``; candidates in ascending id order."""
    ego = Ego(g, a, mask_focal)
    return [ego.scores(b) for b in sorted(ego.B)]


def score_lowest_degree(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).degree(b)


def score_embeddedness(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).embeddedness(b)


def score_adamic_adar(g: LayeredGraph, a: int, b: int) -> float:
    return Ego(g, a).adamic_adar(b)


def score_h1(g: LayeredGraph, a: int, b: int) -> float:
    return Ego(g, a).h1(b)


def score_triangle(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).triangle(b)


def score_square_inside(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).square_in(b)


def score_square_outside(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).square_out(b)


def score_pentagon_inside(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).pent_in(b)


def score_pentagon_outside(g: LayeredGraph, a: int, b: int) -> int:
    return Ego(g, a).pent_out(b)


def _node_rng(seed: int, a: int) -> np.random.Generator:
    return np.random.default_rng([seed, a])


def random_order(g: LayeredGraph, a: int, seed: int) -> list[int]:
    """Uniformly random ordering of ``B`` from a generator keyed by (seed, a)."""
    cands = g.neighbors(a)
    if len(cands) == 0:
        raise NoCandidatesError(f"node {a} has no weak neighbours")
    return _node_rng(seed, a).permutation(cands).tolist()


def score_random(g: LayeredGraph, a: int, rng_seed: int) -> int:
    return random_order(g, a, rng_seed)[0]


def rank_key(value: float, degree: int, node: int, direction: RankDirection, zero_worst: bool = False):
    if direction is RankDirection.MAXIMIZE:
        return (-value, degree, node)
    return (zero_worst and value == 0, value, degree, node)


def rank_values(
    candidates: Sequence[int],
    values: Sequence[float],
    degrees: Sequence[int],
    direction: RankDirection = RankDirection.MAXIMIZE,
    zero_worst: bool = False,
) -> list[int]:
    """Order candidates by value, then smaller degree, then smaller id."""
    if len(candidates) == 0:
        raise NoCandidatesError("nothing to rank")
    keys = [
        rank_key(float(v), int(d), int(c), direction, zero_worst)
        for c, v, d in zip(candidates, values, degrees)
    ]
    order = sorted(range(len(keys)), key=keys.__getitem__)
    return [int(candidates[i]) for i in order]


def rank_candidates(
    scores: Sequence[CandidateScores], key: str, direction: RankDirection | None = None
) -> list[int]:
    if key not in DIRECTIONS:
        raise KeyError(f"unknown score {key!r}")
    direction = direction or DIRECTIONS[key]
    return rank_values(
        [s.candidate for s in scores],
        [getattr(s, key) for s in scores],
        [s.degree for s in scores],
        direction,
        zero_worst=key in ZERO_WORST,
    )


# ---------------------------------------------------------------------------
# brute-force oracle

# constraint -> (cycle length, region of each interior node after b, layer of interior edges)
ORACLE_VARIANTS = {
    "embeddedness": (3, ("B",), "weak"),
    "triangle": (3, ("B",), "strong"),
    "square-inside": (4, ("B", "B"), "strong"),
    "square-outside": (4, ("C", "B"), "strong"),
    "pentagon-inside": (5, ("B", "B", "B"), "strong"),
    "pentagon-outside": (5, ("C", "C", "B"), "strong"),
    "square-outside-weak": (4, ("C", "B"), "weak"),
}

ORACLE_FOR_SCORE = {
    "embeddedness": "embeddedness",
    "triangle": "triangle",
    "square_in": "square-inside",
    "square_out": "square-outside",
    "pent_in": "pentagon-inside",
    "pent_out": "pentagon-outside",
}


def _dense_layers(g: LayeredGraph) -> tuple[np.ndarray, np.ndarray]:
    n = g.node_count
    weak = np.zeros((n, n), dtype=bool)
    strong = np.zeros((n, n), dtype=bool)
    for v in range(n):
        for u, s in zip(g.neighbors(v).tolist(), g.strong[g.indptr[v]:g.indptr[v + 1]].tolist()):
            weak[v, u] = True
            strong[v, u] = s
    return weak, strong


def oracle_count_cycles(g: LayeredGraph, a: int, b: int, length: int, constraint: str) -> int:
    """Count cycles a-b-x..-a by enumerating every tuple of distinct interior nodes.

    The closing edge back to ``a`` and the edge (a, b) are checked on the
    weak layer; every other edge uses the variant's layer. Regions come
    from BFS distances from ``a`` (1 for B, 2 for C).
    """
    want_len, regions, layer = ORACLE_VARIANTS[constraint]
    if length != want_len:
        raise ValueError(f"{constraint} cycles have length {want_len}, not {length}")
    weak, strong = _dense_layers(g)
    inner = strong if layer == "strong" else weak
    if not weak[a, b]:
        raise ContractError(f"({a}, {b}) is not a weak edge")
    dist = bfs_distances(g, a)
    region_of = {v: {1: "B", 2: "C"}.get(dist.get(v, -1)) for v in range(g.node_count)}
    pools = {
        r: [v for v in range(g.node_count) if v not in (a, b) and region_of[v] == r]
        for r in set(regions)
    }
    count = 0
    for path in itertools.product(*(pools[r] for r in regions)):
        if len(set(path)) != len(path):
            continue
        walk = (b,) + path
        if all(inner[walk[i], walk[i + 1]] for i in range(len(walk) - 1)) and weak[walk[-1], a]:
            count += 1
    return count
