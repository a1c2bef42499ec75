"""Hide-and-predict evaluation (p@1, p@5) and the planted-model q sweep."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .graph import LayeredGraph
from .learner import (
    THEORY,
    LRModel,
    TrainingError,
    feature_matrix,
    log_expand,
    schema_names,
    train_matrix,
)
from .motifs import (
    DIRECTIONS,
    SCORE_NAMES,
    ZERO_WORST,
    CandidateScores,
    random_order,
    rank_values,
    score_all,
)
from .planted import InvalidConfigError, PlantedConfig, edge_motif_arrays, generate

logger = logging.getLogger(__name__)

REPORT_HEADER = ("method", "bucket_lo", "bucket_hi", "n", "precision")
SWEEP_HEADER = ("q", "schema", "metric", "mean", "stderr", "reps")
SWEEP_RAW_HEADER = ("q", "rep", "schema", "status", "precision", "recall", "f1")
METRICS = ("precision", "recall", "f1")
PAPER_Q_GRID = tuple(round(0.1 * i, 1) for i in range(1, 26))


class EmptyEligibleError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.05
    d_min: int = 10
    d_max: int = 75
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.d_min > self.d_max:
            raise ValueError("d_min must not exceed d_max")


@dataclass(frozen=True, eq=False)
class HiddenSplit:
    train_graph: LayeredGraph
    test_nodes: tuple[int, ...]
    ground_truth: dict[int, frozenset]
    spec: SplitSpec
    eligible: tuple[int, ...] = ()

    @property
    def hidden_edge_count(self) -> int:
        pairs = {(min(a, b), max(a, b)) for a, t in self.ground_truth.items() for b in t}
        return len(pairs)


def eligible_nodes(g: LayeredGraph, spec: SplitSpec) -> np.ndarray:
    deg = g.weak_degrees()
    sdeg = g.strong_degrees()
    return np.flatnonzero((sdeg > 0) & (deg >= spec.d_min) & (deg <= spec.d_max))


def make_split(g: LayeredGraph, spec: SplitSpec) -> HiddenSplit:
    """Pick ``ceil(fraction * eligible)`` test nodes and hide their strong edges."""
    elig = eligible_nodes(g, spec)
    if len(elig) == 0:
        raise EmptyEligibleError(
            f"no node has a strong edge and weak degree in [{spec.d_min}, {spec.d_max}]"
        )
    k = math.ceil(spec.test_fraction * len(elig))
    rng = np.random.default_rng([spec.seed, 0x5911])
    test = np.sort(rng.choice(elig, size=k, replace=False))
    truth = {int(v): frozenset(g.neighbors(int(v), "strong").tolist()) for v in test}
    return HiddenSplit(g.with_strong_cleared(test.tolist()), tuple(int(v) for v in test), truth, spec, tuple(elig.tolist()))


# ---------------------------------------------------------------------------
# methods


@dataclass
class NodeContext:
    graph: LayeredGraph
    node: int
    _scores: list[CandidateScores] | None = None

    @property
    def scores(self) -> list[CandidateScores]:
        if self._scores is None:
            self._scores = score_all(self.graph, self.node)
        return self._scores

    @property
    def candidates(self) -> list[int]:
        return [s.candidate for s in self.scores]

    @property
    def degrees(self) -> list[int]:
        return [s.degree for s in self.scores]


@dataclass(frozen=True)
class Method:
    """A named ranker: maps a test node's context to a full candidate order."""

    name: str
    rank: Callable[[NodeContext], list[int]]


def score_method(key: str) -> Method:
    direction = DIRECTIONS[key]
    zero_worst = key in ZERO_WORST

    def rank(ctx: NodeContext) -> list[int]:
        return rank_values(ctx.candidates, [getattr(s, key) for s in ctx.scores], ctx.degrees, direction, zero_worst)

    return Method(key, rank)


def random_method(seed: int) -> Method:
    return Method("random", lambda ctx: random_order(ctx.graph, ctx.node, seed))


def constant_method(name: str = "constant") -> Method:
    return Method(name, lambda ctx: rank_values(ctx.candidates, [0.0] * len(ctx.candidates), ctx.degrees))


def oracle_method(truth: dict[int, frozenset]) -> Method:
    def rank(ctx: NodeContext) -> list[int]:
        hits = truth.get(ctx.node, frozenset())
        return rank_values(ctx.candidates, [1.0 if c in hits else 0.0 for c in ctx.candidates], ctx.degrees)

    return Method("oracle", rank)


def model_method(name: str, model: LRModel, selection: str) -> Method:
    def rank(ctx: NodeContext) -> list[int]:
        proba = model.predict_proba_matrix(feature_matrix(ctx.scores, selection))
        return rank_values(ctx.candidates, proba, ctx.degrees)

    return Method(name, rank)


def table1_methods(seed: int) -> list[Method]:
    return [random_method(seed)] + [score_method(k) for k in SCORE_NAMES]


# ---------------------------------------------------------------------------
# training on the visible side of a split


def training_nodes(split: HiddenSplit, max_nodes: int | None = None, seed: int = 0) -> list[int]:
    """Eligible nodes of the training graph that are not test nodes."""
    elig = eligible_nodes(split.train_graph, split.spec)
    test = set(split.test_nodes)
    nodes = [int(v) for v in elig if int(v) not in test]
    if max_nodes is not None and len(nodes) > max_nodes:
        rng = np.random.default_rng([seed, 0x7A1])
        nodes = sorted(rng.choice(nodes, size=max_nodes, replace=False).tolist())
    return nodes


def training_examples(g: LayeredGraph, nodes: Iterable[int]) -> tuple[list[CandidateScores], np.ndarray]:
    """Every weak neighbour of each training node, labelled by its strong flag.

    The focal node's own strong flags are masked while scoring, so the
    features look like those of a test node.
    """
    scores: list[CandidateScores] = []
    labels: list[int] = []
    strong = g.strong_sets()
    for a in nodes:
        for s in score_all(g, a, mask_focal=True):
            scores.append(s)
            labels.append(int(s.candidate in strong[a]))
    return scores, np.array(labels, dtype=np.float64)


@dataclass
class Hyper:
    lr: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    linear: bool = False


def train_split_models(
    split: HiddenSplit, hyper: Hyper | None = None, max_train_nodes: int | None = None, seed: int = 0
) -> dict[str, LRModel]:
    """Fit the basic (group1) and enhanced (group2) models on the training graph."""
    hyper = hyper or Hyper()
    nodes = training_nodes(split, max_train_nodes, seed)
    scores, y = training_examples(split.train_graph, nodes)
    models = {}
    for name, selection in (("basic_ml", "group1"), ("enhanced_ml", "group2")):
        X = feature_matrix(scores, selection)
        models[name] = train_matrix(
            X, y, schema_names(_cols(selection)), hyper.lr, hyper.epochs, hyper.l2, hyper.linear, seed
        )
    return models


def _cols(selection: str):
    from .learner import raw_columns

    return raw_columns(selection)


# ---------------------------------------------------------------------------
# precision at k


@dataclass(frozen=True)
class ReportRow:
    method: str
    bucket_lo: int
    bucket_hi: int
    n: int
    precision: float


@dataclass
class EvalReport:
    rows: list[ReportRow]
    k: int = 1
    skipped: int = 0
    per_node: dict[str, dict[int, float]] = field(default_factory=dict, repr=False)

    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    def overall(self, method: str) -> float:
        vals = list(self.per_node.get(method, {}).values())
        return float(np.mean(vals)) if vals else float("nan")

    def overall_stderr(self, method: str) -> float:
        vals = np.array(list(self.per_node.get(method, {}).values()))
        return float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow((r.method, r.bucket_lo, r.bucket_hi, r.n, repr(float(r.precision))))
        return buf.getvalue()


def _bucket(d: int, spec: SplitSpec, width: int) -> tuple[int, int]:
    lo = spec.d_min + ((d - spec.d_min) // width) * width
    return lo, lo + width - 1


def evaluate_p_at_k(
    split: HiddenSplit,
    methods: Sequence[Method],
    k: int = 1,
    min_truth: int = 1,
    bucket_width: int = 1,
) -> EvalReport:
    g = split.train_graph
    per_node: dict[str, dict[int, float]] = {m.name: {} for m in methods}
    buckets: dict[int, tuple[int, int]] = {}
    skipped = 0
    for v in split.test_nodes:
        truth = split.ground_truth[v]
        if len(truth) < min_truth:
            continue
        if g.degree(v) == 0:
            skipped += 1
            logger.warning("test node %d has no candidates; skipped", v)
            continue
        ctx = NodeContext(g, v)
        buckets[v] = _bucket(g.degree(v), split.spec, bucket_width)
        for m in methods:
            top = m.rank(ctx)[:k]
            per_node[m.name][v] = sum(1 for c in top if c in truth) / k
    if not buckets:
        logger.warning("no test node qualifies for p@%d", k)
    rows = []
    for m in methods:
        groups: dict[tuple[int, int], list[float]] = {}
        for v, val in per_node[m.name].items():
            groups.setdefault(buckets[v], []).append(val)
        for (lo, hi), vals in sorted(groups.items()):
            rows.append(ReportRow(m.name, lo, hi, len(vals), float(np.mean(vals))))
    return EvalReport(rows, k, skipped, per_node)


def evaluate_p_at_1(split: HiddenSplit, methods: Sequence[Method], bucket_width: int = 1) -> EvalReport:
    return evaluate_p_at_k(split, methods, 1, 1, bucket_width)


def evaluate_p_at_5(split: HiddenSplit, methods: Sequence[Method], bucket_width: int = 1) -> EvalReport:
    """p@5 over test nodes with at least five hidden strong edges (denominator always 5)."""
    return evaluate_p_at_k(split, methods, 5, 5, bucket_width)


def expected_random_p_at_1(split: HiddenSplit) -> tuple[float, float]:
    """Closed-form mean and standard error of the random method's p@1."""
    g = split.train_graph
    probs = np.array([len(split.ground_truth[v]) / g.degree(v) for v in split.test_nodes if g.degree(v) > 0])
    mean = float(probs.mean())
    se = float(math.sqrt(np.sum(probs * (1 - probs))) / len(probs))
    return mean, se


# ---------------------------------------------------------------------------
# q sweep


def _seed_for(base_seed: int, q: float, rep: int, role: int) -> int:
    ss = np.random.SeedSequence([base_seed & 0xFFFFFFFF, int(round(q * 1000)), rep, role])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _edge_features(pg, cols) -> tuple[np.ndarray, np.ndarray]:
    _, tri, sq = edge_motif_arrays(pg.graph)
    _, flags = pg.graph.edge_table()
    raw = np.column_stack([{"triangles": tri, "squares": sq}[c] for c in cols]) if len(tri) else np.zeros((0, len(cols)))
    return log_expand(raw), flags.astype(np.float64)


def prf(pred: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Precision, recall, F1 of the positive class; 0 where undefined."""
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass(frozen=True)
class SweepJob:
    base: PlantedConfig
    q: float
    rep: int
    schemas: tuple[str, ...]
    hyper: Hyper


def run_sweep_job(job: SweepJob) -> list[tuple]:
    """One (q, rep) point: fresh train and test graphs, one classifier per schema."""
    cfg = job.base.with_(q=job.q)
    try:
        cfg.validate()
    except InvalidConfigError as exc:
        logger.info("skipping q=%s: %s", job.q, exc)
        return [(job.q, job.rep, s, "invalid", "", "", "") for s in job.schemas]
    train_g = generate(cfg.with_(seed=_seed_for(job.base.seed, job.q, job.rep, 0)))
    test_g = generate(cfg.with_(seed=_seed_for(job.base.seed, job.q, job.rep, 1)))
    out = []
    for schema in job.schemas:
        cols = THEORY[schema]
        Xtr, ytr = _edge_features(train_g, cols)
        Xte, yte = _edge_features(test_g, cols)
        try:
            h = job.hyper
            model = train_matrix(Xtr, ytr, schema_names(cols), h.lr, h.epochs, h.l2, h.linear)
        except TrainingError:
            out.append((job.q, job.rep, schema, "degenerate", "", "", ""))
            continue
        out.append((job.q, job.rep, schema, "ok", *prf(model.predict(Xte), yte.astype(int))))
    return out


@dataclass
class SweepResult:
    raw: list[tuple]  # SWEEP_RAW_HEADER rows, sorted by (q, rep, schema order)
    schemas: tuple[str, ...]

    def table(self) -> list[tuple]:
        groups: dict[tuple[float, str], list[tuple]] = {}
        for row in self.raw:
            groups.setdefault((row[0], row[2]), []).append(row)
        qs = sorted({r[0] for r in self.raw})
        out = []
        for q in qs:
            for schema in self.schemas:
                ok = [r for r in groups.get((q, schema), []) if r[3] == "ok"]
                for i, metric in enumerate(METRICS):
                    if not ok:
                        out.append((q, schema, metric, float("nan"), float("nan"), 0))
                        continue
                    vals = np.array([float(r[4 + i]) for r in ok])
                    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
                    out.append((q, schema, metric, float(vals.mean()), se, len(vals)))
        return out

    def lookup(self, q: float, schema: str, metric: str = "f1") -> tuple[float, float, int]:
        for row in self.table():
            if row[0] == q and row[1] == schema and row[2] == metric:
                return row[3], row[4], row[5]
        raise KeyError((q, schema, metric))

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for q, schema, metric, mean, se, reps in self.table():
            w.writerow((repr(q), schema, metric, "" if reps == 0 else repr(mean), "" if reps == 0 else repr(se), reps))
        return buf.getvalue()

    def raw_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_RAW_HEADER)
        for r in self.raw:
            w.writerow(tuple(repr(x) if isinstance(x, float) else x for x in r))
        return buf.getvalue()


def parse_raw_csv(text: str) -> list[tuple]:
    rows = []
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return rows
    if tuple(header) != SWEEP_RAW_HEADER:
        raise ValueError("not a raw sweep file")
    for r in reader:
        if not r:
            continue
        vals = tuple(float(x) if x else "" for x in r[4:7])
        rows.append((float(r[0]), int(r[1]), r[2], r[3], *vals))
    return rows


def q_sweep(
    base: PlantedConfig,
    q_values: Sequence[float],
    reps: int,
    schemas: Sequence[str] = tuple(THEORY),
    hyper: Hyper | None = None,
    jobs: int = 1,
    done: Iterable[tuple] = (),
    on_result: Callable[[list[tuple]], None] | None = None,
) -> SweepResult:
    """Train/test classifiers on fresh planted graphs for every (q, rep).

    ``done`` holds raw rows from an earlier run; their (q, rep) points are
    not recomputed. Output ordering never depends on ``jobs``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    schemas = tuple(schemas)
    for s in schemas:
        if s not in THEORY:
            raise ValueError(f"unknown schema {s!r}")
    hyper = hyper or Hyper()
    done = list(done)
    finished = {(r[0], r[1]) for r in done}
    todo = [
        SweepJob(base, float(q), rep, schemas, hyper)
        for q in q_values
        for rep in range(reps)
        if (float(q), rep) not in finished
    ]
    results = list(done)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rows in pool.map(run_sweep_job, todo):
                results.extend(rows)
                if on_result:
                    on_result(rows)
    else:
        for job in todo:
            rows = run_sweep_job(job)
            results.extend(rows)
            if on_result:
                on_result(rows)
    order = {s: i for i, s in enumerate(schemas)}
    keep_q = {float(q) for q in q_values}
    results = [r for r in results if r[0] in keep_q and r[1] < reps and r[2] in order]
    results.sort(key=lambda r: (r[0], r[1], order[r[2]]))
    return SweepResult(results, schemas)
