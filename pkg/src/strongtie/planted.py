"""Planted-community graph generators and the triangle/square theory checks.

In the single model every node joins one of ``ceil(n/c)`` communities
uniformly at random; pairs inside a community link with probability
``p*q/sqrt(c)`` and become strong ties, all other pairs link with
probability ``r`` as weak noise. The double model draws two independent
community assignments and takes the union of both within-community layers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .graph import LayeredGraph, from_edges

SINGLE = "single"
DOUBLE = "double"

# stream tags for pair-role keyed generators
_MEMBERSHIP, _WITHIN, _CROSS = 0, 1, 2


class InvalidConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PlantedConfig:
    n: int
    c: float
    p: float
    q: float
    r: float | None = None
    model: str = SINGLE
    seed: int = 0

    def __post_init__(self):
        if self.r is None:
            object.__setattr__(self, "r", math.log(self.n) / self.n if self.n > 1 else 0.0)

    @property
    def rho(self) -> float:
        return self.p * self.q

    @property
    def within_prob(self) -> float:
        return self.p * self.q / math.sqrt(self.c)

    @property
    def communities(self) -> int:
        return math.ceil(self.n / self.c)

    def validate(self) -> "PlantedConfig":
        if self.model not in (SINGLE, DOUBLE):
            raise InvalidConfigError(f"unknown model {self.model!r}")
        if self.n < 1 or self.c <= 0:
            raise InvalidConfigError("n and c must be positive")
        if not (0 <= self.p <= 1 and 0 <= self.r <= 1):
            raise InvalidConfigError("p and r must lie in [0, 1]")
        if self.q < 0:
            raise InvalidConfigError("q must be non-negative")
        if self.within_prob > 1:
            raise InvalidConfigError(f"p*q/sqrt(c) = {self.within_prob:.4f} exceeds 1")
        return self

    def with_(self, **changes) -> "PlantedConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PlantedGraph:
    graph: LayeredGraph
    memberships: np.ndarray  # shape (n, types)
    config: PlantedConfig = field(repr=False)

    def shared_types(self, u, v) -> np.ndarray:
        """Number of community types shared by each pair."""
        return (self.memberships[u] == self.memberships[v]).sum(axis=-1)


@dataclass(frozen=True)
class EdgeMotifCounts:
    edge: tuple[int, int]
    triangles: int
    squares: int


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, *key])


def _pairs_from_index(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices over ``i < j`` pairs (row-major) to ``(i, j)``."""
    k = k.astype(np.int64)
    # rows before i hold i*n - i*(i+1)/2 pairs
    i = (n - 2 - np.floor(np.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # guard against floating point at row boundaries
    too_far = start > k
    i[too_far] -= 1
    start = i * n - i * (i + 1) // 2
    nxt = (i + 1) * n - (i + 1) * (i + 2) // 2
    short = nxt <= k
    i[short] += 1
    start = i * n - i * (i + 1) // 2
    j = k - start + i + 1
    return i, j


def _assign(cfg: PlantedConfig, types: int) -> np.ndarray:
    k = cfg.communities
    return np.column_stack([_rng(cfg.seed, _MEMBERSHIP, t).integers(k, size=cfg.n) for t in range(types)])


def _within_edges(cfg: PlantedConfig, members: np.ndarray, t: int) -> np.ndarray:
    prob = cfg.within_prob
    out = []
    if prob <= 0:
        return np.empty((0, 2), dtype=np.int64)
    order = np.argsort(members, kind="stable")
    bounds = np.searchsorted(members[order], np.arange(cfg.communities + 1))
    for comm in range(cfg.communities):
        nodes = order[bounds[comm]:bounds[comm + 1]]
        if len(nodes) < 2:
            continue
        iu, ju = np.triu_indices(len(nodes), 1)
        keep = _rng(cfg.seed, _WITHIN, t, comm).random(len(iu)) < prob
        out.append(np.column_stack((nodes[iu[keep]], nodes[ju[keep]])))
    return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def _cross_edges(cfg: PlantedConfig, memberships: np.ndarray) -> np.ndarray:
    n = cfg.n
    total = n * (n - 1) // 2
    if cfg.r <= 0 or total == 0:
        return np.empty((0, 2), dtype=np.int64)
    rng = _rng(cfg.seed, _CROSS)
    # Bernoulli(r) on every pair == Binomial count + uniform subset
    k = rng.binomial(total, cfg.r)
    idx = np.sort(rng.choice(total, size=k, replace=False))
    i, j = _pairs_from_index(idx, n)
    cross = ~(memberships[i] == memberships[j]).any(axis=1)
    return np.column_stack((i[cross], j[cross]))


def _generate(cfg: PlantedConfig, types: int) -> PlantedGraph:
    cfg.validate()
    members = _assign(cfg, types)
    within = [_within_edges(cfg, members[:, t], t) for t in range(types)]
    strong = np.concatenate(within)
    cross = _cross_edges(cfg, members)
    g = from_edges(cfg.n, cross, strong)
    return PlantedGraph(g, members, cfg)


def gen_single(cfg: PlantedConfig) -> PlantedGraph:
    if cfg.model != SINGLE:
        raise InvalidConfigError("gen_single needs model='single'")
    return _generate(cfg, 1)


def gen_double(cfg: PlantedConfig) -> PlantedGraph:
    if cfg.model != DOUBLE:
        raise InvalidConfigError("gen_double needs model='double'")
    return _generate(cfg, 2)


def generate(cfg: PlantedConfig) -> PlantedGraph:
    return gen_double(cfg) if cfg.model == DOUBLE else gen_single(cfg)


def membership_lines(pg: PlantedGraph) -> list[str]:
    ext = pg.graph.external_ids
    lines = []
    for v in range(pg.graph.node_count):
        for t in range(pg.memberships.shape[1]):
            lines.append(f"{ext[v]}\t{t + 1}\t{pg.memberships[v, t]}")
    return lines


# ---------------------------------------------------------------------------
# motif counts on the weak graph


def _adjacency(g: LayeredGraph) -> sp.csr_matrix:
    n = g.node_count
    data = np.ones(len(g.indices), dtype=np.int64)
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(n, n))


def edge_motif_arrays(g: LayeredGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per weak edge ``(x < y)``: triangle and 4-cycle counts on the weak graph.

    Uses the 4-cycle identity ``A^3[x,y] - d(x) - d(y) + 1`` for an
    existing edge, with ``A^3[x,y]`` gathered as the sum of ``A^2[u,y]``
    over neighbours ``u`` of ``x``.
    """
    edges, _ = g.edge_table()
    if len(edges) == 0:
        z = np.zeros(0, dtype=np.int64)
        return edges, z, z
    A = _adjacency(g)
    A2 = A @ A
    x, y = edges[:, 0], edges[:, 1]
    deg = g.weak_degrees()
    tri = np.asarray(A2[x, y]).ravel().astype(np.int64)
    counts = deg[x]
    rep_y = np.repeat(y, counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    nbr = g.indices[np.repeat(g.indptr[x], counts) + offsets]
    if g.node_count <= 12000:
        vals = A2.toarray()[nbr, rep_y]
    else:
        vals = np.asarray(A2[nbr, rep_y]).ravel()
    a3 = np.bincount(np.repeat(np.arange(len(x)), counts), weights=vals, minlength=len(x))
    sq = np.rint(a3).astype(np.int64) - deg[x] - deg[y] + 1
    return edges, tri, sq


def edge_motif_counts(g: LayeredGraph) -> list[EdgeMotifCounts]:
    edges, tri, sq = edge_motif_arrays(g)
    return [EdgeMotifCounts((int(u), int(v)), int(t), int(s)) for (u, v), t, s in zip(edges, tri, sq)]


def brute_force_edge_motifs(g: LayeredGraph) -> dict[tuple[int, int], tuple[int, int]]:
    """Exhaustive enumeration of triangles and unordered 4-cycles through each edge."""
    n = g.node_count
    adj = np.zeros((n, n), dtype=bool)
    for u, v in g.edges().tolist():
        adj[u, v] = adj[v, u] = True
    out = {}
    for x, y in g.edges().tolist():
        tri = sum(1 for z in range(n) if adj[x, z] and adj[y, z])
        sq = 0
        for u in range(n):
            for v in range(n):
                if len({x, y, u, v}) == 4 and adj[x, u] and adj[u, v] and adj[v, y]:
                    sq += 1
        out[(x, y)] = (tri, sq)
    return out


# ---------------------------------------------------------------------------
# closed forms


def bound_square_within(cfg: PlantedConfig) -> float:
    return (1 - 5 / cfg.n) * math.sqrt(cfg.c) * cfg.rho ** 3


def square_gap(cfg: PlantedConfig) -> float:
    """``sqrt(c) * rho^3``, the asymptotic within-community square count."""
    return math.sqrt(cfg.c) * cfg.rho ** 3


def prob_triangle_within(cfg: PlantedConfig) -> float:
    if cfg.c - 2 <= 0:
        warnings.warn("community size below 3: triangle probability is 0", stacklevel=2)
        return 0.0
    s = cfg.rho / math.sqrt(cfg.c)
    return 1 - (1 - s * s) ** (cfg.c - 2)


def prob_square_within(cfg: PlantedConfig) -> float:
    if (cfg.c - 2) * (cfg.c - 3) <= 0 or cfg.c < 4:
        warnings.warn("community size below 4: square probability is 0", stacklevel=2)
        return 0.0
    s = cfg.rho / math.sqrt(cfg.c)
    return 1 - (1 - s ** 3) ** ((cfg.c - 2) * (cfg.c - 3))


# ---------------------------------------------------------------------------
# community overlap diagnostics


def community_sizes(pg: PlantedGraph) -> np.ndarray:
    """Sizes of every community, all types concatenated."""
    k = pg.config.communities
    return np.concatenate([np.bincount(pg.memberships[:, t], minlength=k) for t in range(pg.memberships.shape[1])])


def max_cross_intersection(pg: PlantedGraph) -> int:
    """Largest overlap between a Type-1 and a Type-2 community."""
    if pg.memberships.shape[1] < 2:
        raise ValueError("needs a double planted graph")
    k = pg.config.communities
    joint = np.bincount(pg.memberships[:, 0] * k + pg.memberships[:, 1], minlength=k * k)
    return int(joint.max())


# ---------------------------------------------------------------------------
# Monte-Carlo verification


@dataclass
class StratumStats:
    name: str
    edges: int = 0
    mean_tri: float = float("nan")
    se_tri: float = float("nan")
    mean_sq: float = float("nan")
    se_sq: float = float("nan")


@dataclass
class Check:
    name: str
    observed: float
    bound: float
    stderr: float
    relation: str  # "<" or ">"
    satisfied: bool | None  # None for an empty stratum


@dataclass
class ExpectationReport:
    config: PlantedConfig
    trials: int
    strata: dict[str, StratumStats]
    checks: list[Check]
    notes: list[str]

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied is not False for c in self.checks)


def _stratify(pg: PlantedGraph) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    edges, tri, sq = edge_motif_arrays(pg.graph)
    shared = pg.shared_types(edges[:, 0], edges[:, 1]) if len(edges) else np.zeros(0, int)
    strata = {"within": shared >= 1, "cross": shared == 0}
    if pg.memberships.shape[1] == 2:
        strata["both"] = shared == 2
    return {k: (tri[m], sq[m]) for k, m in strata.items()}


def _mean_se(per_trial: list[float], pooled: np.ndarray) -> tuple[float, float]:
    if len(pooled) == 0:
        return float("nan"), float("nan")
    vals = np.array([v for v in per_trial if not math.isnan(v)])
    mean = float(pooled.mean())
    if len(vals) >= 2:
        return mean, float(vals.std(ddof=1) / math.sqrt(len(vals)))
    se = float(pooled.std(ddof=1) / math.sqrt(len(pooled))) if len(pooled) > 1 else float("nan")
    return mean, se


def verify_expectations(cfg: PlantedConfig, trials: int) -> ExpectationReport:
    """Monte-Carlo means of triangle/square counts per edge class versus the asymptotic bounds.

    Standard errors are taken across trials (per-trial stratum means), so
    correlation between edges of one graph is accounted for.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg.validate()
    names = ("within", "cross", "both") if cfg.model == DOUBLE else ("within", "cross")
    pooled = {k: ([], []) for k in names}
    per_trial = {k: ([], []) for k in names}
    for t in range(trials):
        pg = generate(cfg.with_(seed=cfg.seed + t))
        for k, (tri, sq) in _stratify(pg).items():
            pooled[k][0].append(tri)
            pooled[k][1].append(sq)
            per_trial[k][0].append(float(tri.mean()) if len(tri) else float("nan"))
            per_trial[k][1].append(float(sq.mean()) if len(sq) else float("nan"))

    strata = {}
    notes = []
    for k in names:
        tri = np.concatenate(pooled[k][0])
        sq = np.concatenate(pooled[k][1])
        st = StratumStats(k, len(tri))
        if len(tri) == 0:
            notes.append(f"stratum '{k}' is empty")
        else:
            st.mean_tri, st.se_tri = _mean_se(per_trial[k][0], tri)
            st.mean_sq, st.se_sq = _mean_se(per_trial[k][1], sq)
        strata[k] = st

    gap = square_gap(cfg)
    tri_cap = 2.0 if cfg.model == DOUBLE else 1.0

    def check(name, st, attr, bound, rel):
        mean = getattr(st, f"mean_{attr}")
        se = getattr(st, f"se_{attr}")
        if st.edges == 0:
            return Check(name, mean, bound, se, rel, None)
        se0 = 0.0 if math.isnan(se) else se
        ok = mean < bound + 3 * se0 if rel == "<" else mean > bound - 3 * se0
        return Check(name, mean, bound, se, rel, bool(ok))

    w, x = strata["within"], strata["cross"]
    checks = [
        check("within triangles", w, "tri", tri_cap, "<"),
        check("within squares", w, "sq", gap, ">"),
        check("cross triangles", x, "tri", 1.0, "<"),
        check("cross squares", x, "sq", 1.0, "<"),
    ]
    return ExpectationReport(cfg, trials, strata, checks, notes)
