"""Command-line entry point: ``softedge <subcommand> ...`` or ``python -m softedge``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
Results go to stdout or ``--out``; timing and notices go to stderr so that
result files stay byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import fixtures
from .augment import AugmentSpec, Method, augment_epoch
from .gnn import Arch, ModelConfig, ModelParams, Readout
from .graph import Dataset
from .train import (SUMMARY_HEADER, RunConfig, cross_validate, dumps, embeddings_csv, export_embeddings,
                    fit_full, run_grid)
from .tudataset import STATS_HEADER, TuFormatError, compute_stats, load_dataset, write_fixture
from .verify import dropedge_suite, gradcheck_suite, lemma2_suite, lemma3_suite
from .wl import audit_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3

BUILTIN_DATASETS = {
    "DECALIN_PAIR": fixtures.decalin_pair,
    "COLLISION_PAIRS": fixtures.collision_pairs,
    "SIZE_TOY": fixtures.size_separable,
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# shared helpers

def _notice(msg: str):
    print(f"notice: {msg}", file=sys.stderr)


def _seed(args) -> int:
    if args.seed is None:
        _notice("--seed not given; using seed 0")
        return 0
    return args.seed


def _load(args) -> Dataset:
    name = args.dataset
    base = Path(args.dir)
    has_files = (base / f"{name}_A.txt").exists() or (base / name / f"{name}_A.txt").exists()
    if not has_files and name.upper() in BUILTIN_DATASETS:
        return BUILTIN_DATASETS[name.upper()]()
    try:
        return load_dataset(base, name, use_node_attributes=args.use_node_attributes or None)
    except (TuFormatError, OSError) as exc:
        raise DataError(str(exc)) from exc


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _add_data(p, required=True):
    p.add_argument("--dataset", required=required, help="TUDataset name or a built-in fixture name")
    p.add_argument("--dir", default="data", help="directory holding <DS>_*.txt (or <DS>/<DS>_*.txt)")
    p.add_argument("--use-node-attributes", action="store_true",
                   help="append continuous node attributes to one-hot labels")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (defaults to 0 with a notice)")


def _add_augment(p, default_method=None):
    p.add_argument("--augment", choices=[m.value for m in Method], default=default_method)
    p.add_argument("--lambda", dest="ratio", type=float, default=None, help="augmentation ratio in [0, 1)")


def _add_run(p):
    p.add_argument("--config", help="run-config JSON; flags given on the command line override it")
    p.add_argument("--arch", choices=[a.value for a in Arch])
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--readout", choices=[r.value for r in Readout])
    p.add_argument("--dropout", type=float, help="dropout before the classification head")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    _add_augment(p)
    _add_seed(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for folds")


def _run_config(args) -> RunConfig:
    try:
        base = {}
        if args.config:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        cfg = RunConfig.from_dict(base)
        model_kw = {k: v for k, v in (("arch", args.arch), ("num_layers", args.layers),
                                      ("hidden_dim", args.hidden), ("readout", args.readout),
                                      ("dropout_after_dense", args.dropout)) if v is not None}
        if "arch" in model_kw and args.readout is None:
            model_kw["readout"] = None  # re-derive the arch default
        model = replace(cfg.model, **model_kw) if model_kw else cfg.model
        aug_kw = {k: v for k, v in (("method", args.augment), ("ratio", args.ratio)) if v is not None}
        augment = replace(cfg.augment, **aug_kw) if aug_kw else cfg.augment
        top = {k: v for k, v in (("lr0", args.lr), ("batch_size", args.batch_size), ("epochs", args.epochs),
                                 ("folds", args.folds), ("repeats", args.repeats)) if v is not None}
        if args.seed is not None or "seed" not in base:
            top["seed"] = _seed(args)
        return replace(cfg, model=model, augment=augment, **top)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid run configuration: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_stats(args) -> int:
    stats = compute_stats(_load(args))
    if args.format == "csv":
        _write(STATS_HEADER + "\n" + stats.csv_row() + "\n", args.out)
    else:
        _write(stats.table_row() + "\n", args.out)
    return EXIT_OK


def cmd_audit(args) -> int:
    ds = _load(args)
    try:
        spec = AugmentSpec(Method(args.augment), args.ratio or 0.0, _seed(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = audit_dataset(ds, spec, k=args.k, epochs=args.epochs, max_witnesses=args.max_witnesses)
    if args.out:
        _write(dumps(report.to_dict()), args.out)
        if args.out != "-":
            print(report.table())
    else:
        print(report.table())
    if spec.method is Method.SOFTEDGE and spec.ratio > 0 and (report.counts["type1"] or report.counts["type2"]):
        print("error: SoftEdge pool contains type-1/type-2 collisions", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_augment(args) -> int:
    ds = _load(args)
    try:
        spec = AugmentSpec(Method(args.augment), args.ratio or 0.0, _seed(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    aug = augment_epoch(ds, spec, args.epoch)
    files = write_fixture(aug, args.out, weights=True)
    print(f"wrote {len(aug)} graphs to {files.adjacency.parent} (weights in {files.edge_weights.name})")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load(args)
    cfg = _run_config(args)
    t0 = time.perf_counter()
    result = cross_validate(ds, cfg, jobs=args.jobs)
    _write(dumps(result.to_dict()), args.out)
    if args.summary:
        _write(SUMMARY_HEADER + "\n" + result.summary_row() + "\n", args.summary)
    if args.checkpoint:
        params, _ = fit_full(ds, cfg)
        params.save(args.checkpoint)
    print(f"{ds.name}: mean acc {result.mean_acc:.4f} +- {result.std_acc:.4f} "
          f"({time.perf_counter() - t0:.1f} s)", file=sys.stderr)
    return EXIT_OK


def cmd_grid(args) -> int:
    ds = _load(args)
    cfg = _run_config(args)
    grid = None
    if args.grid:
        try:
            text = args.grid if args.grid.lstrip().startswith("{") else Path(args.grid).read_text(encoding="utf-8")
            grid = json.loads(text)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read grid: {exc}") from exc
    t0 = time.perf_counter()
    res = run_grid(ds, cfg, grid, jobs=args.jobs)
    _write(dumps(res.to_dict(per_config=args.per_config)), args.out)
    if args.summary:
        _write(SUMMARY_HEADER + "\n" + "".join(r.summary_row() + "\n" for r in res.runs), args.summary)
    print(f"{len(res.runs)} configs, best mean acc {res.best.mean_acc:.4f} "
          f"({time.perf_counter() - t0:.1f} s)", file=sys.stderr)
    return EXIT_OK


def cmd_export(args) -> int:
    ds = _load(args)
    try:
        params = ModelParams.load(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"{args.checkpoint}: {exc}") from exc
    if params.feature_dim != ds.feature_dim:
        raise DataError(f"checkpoint expects {params.feature_dim} features, dataset has {ds.feature_dim}")
    rows = export_embeddings(ds, params)
    _write(embeddings_csv(rows, params.config.hidden_dim), args.out)
    return EXIT_OK


def _lemma2_graph(args):
    if args.dataset is None:
        return fixtures.decalin()
    ds = _load(args)
    if not 0 <= args.graph_index < len(ds):
        raise UsageError(f"--graph-index out of range for {ds.name} ({len(ds)} graphs)")
    return ds[args.graph_index]


def cmd_verify(args) -> int:
    seed = _seed(args)
    suites = ["lemma2", "lemma3", "dropedge", "gradcheck"] if args.suite == "all" else [args.suite]
    ratio = 0.2 if args.ratio is None else args.ratio
    results = []
    for name in suites:
        if name == "lemma2":
            results.append(lemma2_suite(_lemma2_graph(args), ratio, args.trials or 10_000, seed))
        elif name == "lemma3":
            results.append(lemma3_suite(args.trials or 1000, ratio, seed))
        elif name == "dropedge":
            results.append(dropedge_suite(args.trials or 1000, seed))
        else:
            results.append(gradcheck_suite(args.trials or 100))
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="softedge", description="SoftEdge graph-classification lab")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="dataset statistics")
    _add_data(p)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("audit", help="WL sample-collision audit")
    _add_data(p)
    _add_augment(p, default_method="none")
    _add_seed(p)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("-k", type=int, default=None, help="WL rounds (default: max node count)")
    p.add_argument("--max-witnesses", type=int, default=100)
    p.add_argument("--out", help="write the JSON report here ('-' for stdout)")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("augment", help="write one augmented epoch in TUDataset format")
    _add_data(p)
    _add_augment(p, default_method="softedge")
    _add_seed(p)
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_augment)

    for name, func, helptext in (("train", cmd_train, "cross-validated training run"),
                                 ("grid", cmd_grid, "hyperparameter grid sweep")):
        p = sub.add_parser(name, help=helptext)
        _add_data(p)
        _add_run(p)
        p.add_argument("--out", help="result JSON path (default stdout)")
        p.add_argument("--summary", help="CSV summary path")
        if name == "train":
            p.add_argument("--checkpoint", help="also fit on all graphs and save the model here")
        else:
            p.add_argument("--grid", help="JSON file or inline JSON object of hyperparameter lists (default: the full grid)")
            p.add_argument("--per-config", action="store_true", help="include every config in the JSON")
        p.set_defaults(func=func)

    p = sub.add_parser("export-embeddings", help="graph embeddings from a checkpoint as CSV")
    _add_data(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="built-in self-check suites")
    p.add_argument("--suite", choices=("lemma2", "lemma3", "dropedge", "gradcheck", "all"), default="all")
    p.add_argument("--trials", type=int, default=None, help="trials (seeds for gradcheck)")
    p.add_argument("--lambda", dest="ratio", type=float, default=None)
    _add_seed(p)
    _add_data(p, required=False)
    p.add_argument("--graph-index", type=int, default=0, help="lemma2 graph when --dataset is given")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, FloatingPointError, RuntimeError) as exc:
        print(f"invariant violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
