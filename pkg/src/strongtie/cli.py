"""Command-line entry point: ``strongtie <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .evaluation import (
    PAPER_Q_GRID,
    SWEEP_RAW_HEADER,
    EmptyEligibleError,
    Hyper,
    SplitSpec,
    evaluate_p_at_1,
    evaluate_p_at_5,
    make_split,
    model_method,
    oracle_method,
    parse_raw_csv,
    q_sweep,
    table1_methods,
    train_split_models,
)
from .fixture import EXPECTED_B1, ID, fixture_graph
from .graph import POLICIES, GraphFormatError, LayeredGraph, RejectedEdgeError, load_graph, save_graph
from .learner import THEORY, TrainingError, save_model
from .motifs import ORACLE_FOR_SCORE, ORACLE_VARIANTS, SCORE_NAMES, oracle_count_cycles, score_all
from .planted import InvalidConfigError, PlantedConfig, generate, membership_lines
from .sketch import DEFAULT_HASH_SEED, DEFAULT_PRECISION, MAX_PRECISION, MIN_PRECISION, approx_square_count, exact_weak_square_outside

logger = logging.getLogger("strongtie")

OUT_ENV = "STRONGTIE_OUTPUT_DIR"
PAPER_DEFAULTS = {"n": 4000, "c": 30.0, "p": 0.85}
SMOKE = {"n": 1000, "q_values": (0.9, 1.3, 1.7, 2.1, 2.5), "reps": 5}


class UsageError(Exception):
    pass


def _out_path(name: str | None, default: str) -> Path:
    path = Path(name) if name else Path(os.environ.get(OUT_ENV, ".")) / default
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_meta(path: Path, command: str, config: dict, extra: dict | None = None) -> None:
    doc = {"command": command, "config": config, "version": __version__}
    if extra:
        doc.update(extra)
    Path(str(path) + ".meta.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _load(path: str, policy: str) -> LayeredGraph:
    if not Path(path).exists():
        raise UsageError(f"graph file not found: {path}")
    g, stats = load_graph(path, policy)
    if stats.dropped_strong or stats.dropped_self_loops:
        logger.info(
            "dropped %d strong edges missing from the weak graph and %d self-loops",
            stats.dropped_strong,
            stats.dropped_self_loops,
        )
    return g


def _node_id(g: LayeredGraph, label: int) -> int:
    try:
        return g.external_ids.index(label)
    except ValueError:
        raise UsageError(f"node {label} is not in the graph") from None


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = PlantedConfig(args.n, args.c, args.p, args.q, args.r, args.model, args.seed)
    try:
        pg = generate(cfg)
    except InvalidConfigError as exc:
        raise UsageError(str(exc)) from None
    out = _out_path(args.out, f"planted_{args.model}_seed{args.seed}.tsv")
    config = cfg.to_dict()
    save_graph(pg.graph, out, header=[f"strongtie {__version__} generate", json.dumps(config, sort_keys=True)])
    members = Path(str(out) + ".members.tsv")
    members.write_text("# node\ttype\tcommunity_id\n" + "\n".join(membership_lines(pg)) + "\n")
    _write_meta(out, "generate", config)
    reloaded, _ = load_graph(out, "strict")
    if reloaded.weak_edge_count != pg.graph.weak_edge_count or reloaded.strong_edge_count != pg.graph.strong_edge_count:
        raise RuntimeError("round-trip check failed")
    print(f"nodes={pg.graph.node_count} weak_edges={pg.graph.weak_edge_count} strong_edges={pg.graph.strong_edge_count}")
    print(f"wrote {out} and {members}")
    return 0


def cmd_evaluate(args) -> int:
    g = _load(args.graph, args.policy)
    spec = SplitSpec(args.test_fraction, args.d_min, args.d_max, args.seed)
    try:
        split = make_split(g, spec)
    except EmptyEligibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    hyper = Hyper(args.lr, args.epochs, args.l2, args.linear)
    methods = table1_methods(args.seed)
    try:
        models = train_split_models(split, hyper, args.max_train_nodes, args.seed)
    except TrainingError as exc:
        logger.warning("skipping learned models: %s", exc)
        models = {}
    for name, selection in (("basic_ml", "group1"), ("enhanced_ml", "group2")):
        if name in models:
            methods.append(model_method(name, models[name], selection))
    if args.oracle:
        methods.append(oracle_method(split.ground_truth))
    k = args.k
    report = (evaluate_p_at_5 if k == 5 else evaluate_p_at_1)(split, methods, args.bucket_width)
    out = _out_path(args.out, f"p_at_{k}.csv")
    out.write_text(report.to_csv())
    config = {
        "graph": str(args.graph),
        "policy": args.policy,
        "split": asdict(spec),
        "hyper": asdict(hyper),
        "k": k,
        "bucket_width": args.bucket_width,
        "max_train_nodes": args.max_train_nodes,
        "oracle": args.oracle,
        "seed": args.seed,
    }
    summary = {
        "eligible": len(split.eligible),
        "test_nodes": len(split.test_nodes),
        "hidden_edges": split.hidden_edge_count,
        "overall": {m: report.overall(m) for m in report.methods()},
    }
    _write_meta(out, "evaluate", config, {"summary": summary})
    if args.save_models:
        d = Path(args.save_models)
        d.mkdir(parents=True, exist_ok=True)
        for name, m in models.items():
            save_model(m, d / f"{name}.json")
    for m in report.methods():
        print(f"{m:>14s}  p@{k} = {report.overall(m):.4f}")
    print(f"wrote {out}")
    return 0


def _parse_q_values(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(round(float(x), 6) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad --q-values {text!r}") from None
    if not vals:
        raise UsageError("--q-values is empty")
    return vals


def cmd_sweep(args) -> int:
    n, c, p = args.n, args.c, args.p
    q_values = _parse_q_values(args.q_values) if args.q_values else None
    reps = args.reps
    if args.paper_defaults:
        n, c, p = PAPER_DEFAULTS["n"], PAPER_DEFAULTS["c"], PAPER_DEFAULTS["p"]
        q_values = q_values or PAPER_Q_GRID
    if args.smoke:
        n = SMOKE["n"]
        q_values = q_values or SMOKE["q_values"]
        reps = reps if reps is not None else SMOKE["reps"]
    if reps is None:
        reps = 20
    if reps < 1:
        raise UsageError("--reps must be >= 1")
    if n is None:
        raise UsageError("--n is required unless --paper-defaults or --smoke is given")
    q_values = q_values or PAPER_Q_GRID
    base = PlantedConfig(n, c, p, q_values[0], args.r, args.model, args.seed)
    schemas = tuple(args.schemas.split(",")) if args.schemas else tuple(THEORY)
    hyper = Hyper(args.lr, args.epochs, args.l2, args.linear)
    out = _out_path(args.out, "sweep.csv")
    raw_path = Path(str(out) + ".raw.csv")

    done = []
    if args.resume and raw_path.exists():
        done = parse_raw_csv(raw_path.read_text())
        logger.info("resuming: %d rows already computed", len(done))
    else:
        raw_path.write_text(",".join(SWEEP_RAW_HEADER) + "\n")

    def checkpoint(rows):
        with open(raw_path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for r in rows:
                w.writerow(tuple(repr(x) if isinstance(x, float) else x for x in r))

    result = q_sweep(base, q_values, reps, schemas, hyper, args.jobs, done, checkpoint)
    out.write_text(result.table_csv())
    # canonical raw file: sorted, independent of job scheduling
    raw_path.write_text(result.raw_csv())
    config = {
        "base": base.to_dict(),
        "q_values": list(q_values),
        "reps": reps,
        "schemas": list(schemas),
        "hyper": asdict(hyper),
        "seed": args.seed,
    }
    _write_meta(out, "sweep", config)
    print(f"wrote {out} ({len(result.table())} rows)")
    return 0


def cmd_score(args) -> int:
    g = _load(args.graph, args.policy)
    a = _node_id(g, args.node)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("node", "candidate") + SCORE_NAMES)
    for s in score_all(g, a):
        row = s.as_tuple()
        w.writerow((g.label(a), g.label(row[0])) + tuple(repr(x) if isinstance(x, float) else x for x in row[1:]))
    if args.out:
        out = _out_path(args.out, "scores.csv")
        out.write_text(buf.getvalue())
        _write_meta(out, "score", {"graph": args.graph, "node": args.node, "policy": args.policy})
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def fixture_check(g: LayeredGraph, a: int = ID["a"], b1: int = ID["b1"]) -> list[str]:
    """Compare the scores of (a, b1) with the known values and every scorer with the oracle."""
    problems = []
    by_cand = {s.candidate: s for s in score_all(g, a)}
    got = by_cand.get(b1)
    if got is None:
        return [f"b1 ({b1}) is not a neighbour of a ({a})"]
    for key, want in EXPECTED_B1.items():
        val = getattr(got, key)
        ok = abs(val - want) <= 1e-9 if key == "adamic_adar" else val == want
        if not ok:
            problems.append(f"{key}: expected {want}, got {val}")
    for b, s in by_cand.items():
        for key, variant in ORACLE_FOR_SCORE.items():
            ref = oracle_count_cycles(g, a, b, ORACLE_VARIANTS[variant][0], variant)
            if getattr(s, key) != ref:
                problems.append(f"{key} for candidate {b}: scorer {getattr(s, key)} != oracle {ref}")
    return problems


def cmd_fixture(args) -> int:
    g = _load(args.graph, args.policy) if args.graph else fixture_graph()
    problems = fixture_check(g)
    if problems:
        print("FIXTURE FAIL")
        for p in problems:
            print(f"  - {p}")
        return 1
    print("FIXTURE PASS: all scores for (a, b1) match; all scorers agree with the oracle")
    return 0


def cmd_hll_squares(args) -> int:
    if not MIN_PRECISION <= args.precision <= MAX_PRECISION:
        raise UsageError(f"--precision must be in [{MIN_PRECISION}, {MAX_PRECISION}]")
    if args.graph:
        g = _load(args.graph, args.policy)
        a = _node_id(g, args.node)
    else:
        g = fixture_graph()
        a = ID["a"] if args.node is None else _node_id(g, args.node)
    approx = approx_square_count(g, a, args.precision, args.hash_seed)
    exact = exact_weak_square_outside(g, a) if args.exact_check else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("node", "candidate", "approx_count") + (("exact_count",) if exact is not None else ()))
    for b, val in approx.items():
        row = (g.label(a), g.label(b), repr(float(val)))
        w.writerow(row + ((exact[b],) if exact is not None else ()))
    config = {"graph": args.graph, "node": args.node, "precision_bits": args.precision, "hash_seed": args.hash_seed}
    if args.out:
        out = _out_path(args.out, "hll_squares.csv")
        out.write_text(buf.getvalue())
        _write_meta(out, "hll-squares", config)
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------


def _planted_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--model", choices=("single", "double"), default="single")
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--c", type=float, default=30.0)
    p.add_argument("--p", type=float, default=0.85)
    p.add_argument("--r", type=float, default=None, help="noise edge probability (default ln n / n)")


def _learner_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--linear", action="store_true", help="least-squares instead of logistic loss")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strongtie", description=__doc__)
    parser.add_argument("--version", action="version", version=f"strongtie {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a planted-community graph")
    _planted_args(p, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="hide-and-predict p@1 / p@5 evaluation")
    p.add_argument("--graph", required=True)
    p.add_argument("--policy", choices=POLICIES, default="drop")
    p.add_argument("--test-fraction", type=float, default=0.05)
    p.add_argument("--d-min", type=int, default=10)
    p.add_argument("--d-max", type=int, default=75)
    p.add_argument("--k", type=int, choices=(1, 5), default=1)
    p.add_argument("--bucket-width", type=int, default=1)
    p.add_argument("--max-train-nodes", type=int, default=None)
    p.add_argument("--oracle", action="store_true", help="add a ground-truth sanity method")
    p.add_argument("--save-models", metavar="DIR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _learner_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="q sweep of triangle/square edge classifiers")
    _planted_args(p, required=False)
    p.add_argument("--paper-defaults", action="store_true", help="n=4000, c=30, p=0.85, q=0.1..2.5")
    p.add_argument("--smoke", action="store_true", help="reduced grid: n=1000, 5 q values, 5 reps")
    p.add_argument("--q-values", help="comma separated q grid")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--schemas", help="comma separated subset of " + ",".join(THEORY))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _learner_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", help="print every score for the neighbours of a node")
    p.add_argument("--graph", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--policy", choices=POLICIES, default="drop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fixture", help="self-check on the toy graph")
    p.add_argument("--graph", help="check an edited copy of the toy graph instead")
    p.add_argument("--policy", choices=POLICIES, default="drop")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("hll-squares", help="sketch-based square counts for one focal node")
    p.add_argument("--graph", help="edge list (default: toy graph)")
    p.add_argument("--node", type=int)
    p.add_argument("--policy", choices=POLICIES, default="drop")
    p.add_argument("--precision", type=int, default=DEFAULT_PRECISION)
    p.add_argument("--hash-seed", "--seed", dest="hash_seed", type=int, default=DEFAULT_HASH_SEED)
    p.add_argument("--exact-check", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_hll_squares)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "hll-squares" and args.graph and args.node is None:
        parser.error("--node is required with --graph")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (GraphFormatError, RejectedEdgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
