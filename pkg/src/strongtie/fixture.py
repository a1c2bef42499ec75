"""The ten-node toy graph centred on node ``a`` and its known scores for ``b1``."""

from __future__ import annotations

import math

from .graph import LayeredGraph, parse_edge_lines

NAMES = ("a", "b1", "b2", "b3", "c1", "c2", "d1", "d2", "d3", "d4")
ID = {name: i for i, name in enumerate(NAMES)}

WEAK_ONLY = [
    ("a", "b1"), ("a", "b2"), ("a", "b3"), ("b1", "b3"),
    ("b2", "d1"), ("b2", "d2"), ("b3", "d3"), ("b3", "d4"),
]
STRONG = [
    ("b1", "b2"), ("b2", "b3"), ("b1", "c1"),
    ("b1", "c2"), ("b2", "c2"), ("c1", "c2"),
]

EXPECTED_B1 = {
    "degree": 5,
    "embeddedness": 2,
    "adamic_adar": 1 / math.log(5) + 1 / math.log(6),
    "h1": 5,
    "triangle": 1,
    "square_in": 1,
    "square_out": 1,
    "pent_in": 0,
    "pent_out": 1,
}


def fixture_lines(weak_only=WEAK_ONLY, strong=STRONG) -> list[str]:
    """Edge-list lines; node names outside ``NAMES`` get the next free ids."""
    ids = dict(ID)
    for u, v in list(weak_only) + list(strong):
        for name in (u, v):
            ids.setdefault(name, len(ids))
    lines = ["# toy graph: " + " ".join(f"{i}={n}" for n, i in ids.items())]
    for u, v in weak_only:
        lines.append(f"{ids[u]}\t{ids[v]}\t0")
    for u, v in strong:
        lines.append(f"{ids[u]}\t{ids[v]}\t0")
        lines.append(f"{ids[u]}\t{ids[v]}\t1")
    return lines


def fixture_graph(weak_only=WEAK_ONLY, strong=STRONG) -> LayeredGraph:
    g, _ = parse_edge_lines(fixture_lines(weak_only, strong))
    return g
