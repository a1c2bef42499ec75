"""Layered weak/strong graph storage and loading.

A :class:`LayeredGraph` holds an undirected weak-tie graph in CSR form
together with a boolean flag per adjacency entry marking the edges that are
also strong ties. Node ids are dense integers; the original labels are kept
in ``external_ids``.

Edge-list format (UTF-8, tab separated, ``#`` starts a comment)::

    u<TAB>v<TAB>label

``label`` is ``0`` for a weak-graph edge and ``1`` for a strong-graph edge.
A strong edge is only kept if the same pair also appears as a weak edge,
unless the ``implied`` policy is used, in which case a strong line also
asserts the weak edge.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

WEAK = "weak"
STRONG = "strong"
POLICIES = ("drop", "strict", "implied")


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class RejectedEdgeError(ValueError):
    """Raised in strict mode for self-loops and strong edges missing from the weak graph."""


@dataclass(frozen=True)
class LoadStats:
    dropped_strong: int = 0
    dropped_self_loops: int = 0
    merged_duplicates: int = 0


@dataclass(frozen=True, eq=False)
class LayeredGraph:
    """Immutable weak graph with a strong-edge subset.

    ``indptr``/``indices`` form a CSR adjacency of the weak graph with each
    neighbour list sorted ascending. ``strong[k]`` says whether the edge
    stored at ``indices[k]`` is strong; both directions carry the same flag.
    """

    indptr: np.ndarray
    indices: np.ndarray
    strong: np.ndarray
    external_ids: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def weak_edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def strong_edge_count(self) -> int:
        return int(self.strong.sum()) // 2

    def _check(self, v: int) -> None:
        if not 0 <= v < self.node_count:
            raise IndexError(f"node {v} out of range [0, {self.node_count})")

    def neighbors(self, v: int, layer: str = WEAK) -> np.ndarray:
        self._check(v)
        lo, hi = self.indptr[v], self.indptr[v + 1]
        if layer == WEAK:
            return self.indices[lo:hi]
        if layer == STRONG:
            return self.indices[lo:hi][self.strong[lo:hi]]
        raise ValueError(f"unknown layer {layer!r}")

    def degree(self, v: int, layer: str = WEAK) -> int:
        self._check(v)
        lo, hi = self.indptr[v], self.indptr[v + 1]
        if layer == WEAK:
            return int(hi - lo)
        return int(self.strong[lo:hi].sum())

    def weak_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def strong_degrees(self) -> np.ndarray:
        if "strong_deg" not in self._cache:
            cum = np.concatenate(([0], np.cumsum(self.strong, dtype=np.int64)))
            self._cache["strong_deg"] = cum[self.indptr[1:]] - cum[self.indptr[:-1]]
        return self._cache["strong_deg"]

    def weak_sets(self) -> list[frozenset]:
        """Per-node weak neighbour sets (built lazily, shared by scorers)."""
        if "weak_sets" not in self._cache:
            ind = self.indices.tolist()
            ptr = self.indptr.tolist()
            self._cache["weak_sets"] = [
                frozenset(ind[ptr[v]:ptr[v + 1]]) for v in range(self.node_count)
            ]
        return self._cache["weak_sets"]

    def strong_sets(self) -> list[frozenset]:
        if "strong_sets" not in self._cache:
            ind = self.indices.tolist()
            flags = self.strong.tolist()
            ptr = self.indptr.tolist()
            self._cache["strong_sets"] = [
                frozenset(u for u, s in zip(ind[ptr[v]:ptr[v + 1]], flags[ptr[v]:ptr[v + 1]]) if s)
                for v in range(self.node_count)
            ]
        return self._cache["strong_sets"]

    def has_edge(self, u: int, v: int, layer: str = WEAK) -> bool:
        self._check(u)
        self._check(v)
        lo, hi = self.indptr[u], self.indptr[u + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], v)
        if k >= hi or self.indices[k] != v:
            return False
        return layer == WEAK or bool(self.strong[k])

    def edges(self, layer: str = WEAK) -> np.ndarray:
        """Return an ``(m, 2)`` array of edges with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        keep = src < self.indices
        if layer == STRONG:
            keep &= self.strong
        return np.column_stack((src[keep], self.indices[keep]))

    def edge_table(self) -> tuple[np.ndarray, np.ndarray]:
        """All weak edges ``(u < v)`` and their strong flags."""
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        keep = src < self.indices
        return np.column_stack((src[keep], self.indices[keep])), self.strong[keep].copy()

    def with_strong_cleared(self, nodes: Iterable[int]) -> "LayeredGraph":
        """Copy of the graph with every strong flag incident to ``nodes`` removed."""
        mask = np.zeros(self.node_count, dtype=bool)
        mask[list(nodes)] = True
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        hit = mask[src] | mask[self.indices]
        strong = self.strong & ~hit
        return LayeredGraph(self.indptr, self.indices, strong, self.external_ids)

    def label(self, v: int):
        return self.external_ids[v] if self.external_ids else v


def from_edges(
    node_count: int,
    weak_edges: np.ndarray | Sequence,
    strong_edges: np.ndarray | Sequence = (),
    external_ids: Sequence | None = None,
) -> LayeredGraph:
    """Build a graph from dense-id edge arrays.

    Strong edges are added to the weak graph as well; duplicates merge.
    """
    weak = np.asarray(weak_edges, dtype=np.int64).reshape(-1, 2)
    strong = np.asarray(strong_edges, dtype=np.int64).reshape(-1, 2)
    allp = np.concatenate((weak, strong))
    if len(allp) and (allp.min() < 0 or allp.max() >= node_count):
        raise IndexError("edge endpoint out of range")
    if np.any(allp[:, 0] == allp[:, 1]):
        raise RejectedEdgeError("self-loop in edge list")
    flags = np.concatenate((np.zeros(len(weak), bool), np.ones(len(strong), bool)))
    lo = np.minimum(allp[:, 0], allp[:, 1])
    hi = np.maximum(allp[:, 0], allp[:, 1])
    key = lo * node_count + hi
    order = np.lexsort((~flags, key))
    key, flags = key[order], flags[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    # after lexsort the strong copy of a duplicated pair comes first
    key, flags = key[first], flags[first]
    u, v = key // node_count, key % node_count
    src = np.concatenate((u, v))
    dst = np.concatenate((v, u))
    fl = np.concatenate((flags, flags))
    order = np.lexsort((dst, src))
    src, dst, fl = src[order], dst[order], fl[order]
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=node_count), out=indptr[1:])
    ext = tuple(external_ids) if external_ids is not None else tuple(range(node_count))
    return LayeredGraph(indptr, dst.astype(np.int64), fl.astype(bool), ext)


def parse_edge_lines(lines: Iterable[str], policy: str = "drop") -> tuple[LayeredGraph, LoadStats]:
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    weak: dict[tuple[int, int], None] = {}
    strong: dict[tuple[int, int], int] = {}
    labels: set[int] = set()
    self_loops = 0
    duplicates = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GraphFormatError(f"expected 3 tab-separated fields, got {len(parts)}", line_no)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {line!r}", line_no) from None
        if u < 0 or v < 0:
            raise GraphFormatError("node ids must be non-negative", line_no)
        if parts[2].strip() not in ("0", "1"):
            raise GraphFormatError(f"label must be 0 or 1, got {parts[2]!r}", line_no)
        is_strong = parts[2].strip() == "1"
        labels.add(u)
        labels.add(v)
        if u == v:
            if policy == "strict":
                raise RejectedEdgeError(f"line {line_no}: self-loop on node {u}")
            self_loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        target = strong if is_strong else weak
        if key in target:
            duplicates += 1
        target.setdefault(key, line_no)
        if is_strong and policy == "implied":
            weak.setdefault(key, None)

    dropped = 0
    kept_strong = []
    for key, line_no in strong.items():
        if key in weak:
            kept_strong.append(key)
        elif policy == "strict":
            raise RejectedEdgeError(f"line {line_no}: strong edge {key} is not a weak edge")
        else:
            dropped += 1
    if dropped:
        logger.info("dropped %d strong edges absent from the weak graph", dropped)

    ext = sorted(labels)
    remap = {x: i for i, x in enumerate(ext)}
    w = np.array([(remap[a], remap[b]) for a, b in weak], dtype=np.int64).reshape(-1, 2)
    s = np.array([(remap[a], remap[b]) for a, b in kept_strong], dtype=np.int64).reshape(-1, 2)
    g = from_edges(len(ext), w, s, external_ids=ext)
    return g, LoadStats(dropped, self_loops, duplicates)


def load_graph(path: str | Path, policy: str = "drop") -> tuple[LayeredGraph, LoadStats]:
    """Load an edge-list file; returns the graph and drop/merge counters."""
    with open(path, encoding="utf-8") as fh:
        return parse_edge_lines(fh, policy)


def format_edge_lines(g: LayeredGraph, header: Sequence[str] = ()) -> str:
    """Serialize with external ids: one ``0`` line per weak edge plus a ``1`` line per strong edge."""
    out = [f"# {h}" for h in header]
    edges, flags = g.edge_table()
    ext = g.external_ids
    for (u, v), s in zip(edges.tolist(), flags.tolist()):
        out.append(f"{ext[u]}\t{ext[v]}\t0")
        if s:
            out.append(f"{ext[u]}\t{ext[v]}\t1")
    return "\n".join(out) + ("\n" if out else "")


def save_graph(g: LayeredGraph, path: str | Path, header: Sequence[str] = ()) -> None:
    Path(path).write_text(format_edge_lines(g, header), encoding="utf-8")


def frontier_two(g: LayeredGraph, a: int) -> set[int]:
    """Nodes at weak-graph distance exactly two from ``a``."""
    g._check(a)
    sets = g.weak_sets()
    near = sets[a]
    out: set[int] = set()
    for b in near:
        out.update(sets[b])
    out.difference_update(near)
    out.discard(a)
    return out


def bfs_distances(g: LayeredGraph, source: int) -> dict[int, int]:
    g._check(source)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in g.neighbors(v).tolist():
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist
