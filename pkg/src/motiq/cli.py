"""``motiq`` command line interface.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .architectures import reverse_binary_tree
from .backend.program import compile_program, to_qasm
from .expansion import count_unitaries, graphs_to_json, resolve, to_dot
from .grammar import parse_motif_expr
from .motif import Motif, motif_from_dict, motif_to_dict
from .qpr import DESK_SCALE

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("motiq")


class ConfigError(Exception):
    pass


# -- shared helpers -------------------------------------------------------------------

def _load_motif(args) -> Motif:
    src = args.motif
    if src is None:
        return reverse_binary_tree(args.qubits, args.conv_stride, args.pool_stride, args.filter)
    path = Path(src)
    if path.suffix == ".json" or path.is_file():
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"motif file {src} not found") from None
        return motif_from_dict(data.get("motif", data))
    return parse_motif_expr(src)


def _compile(args, motif, num_qubits=None):
    return compile_program(resolve(motif), conv_mapping=args.conv_mapping,
                           pool_mapping=args.pool_mapping, readout=args.readout,
                           num_qubits=num_qubits)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")


def _parse_weights(args):
    from .qpr import FitnessWeights

    try:
        c = [float(x) for x in args.weights.split(",")]
    except ValueError:
        raise ConfigError(f"--weights must be three numbers, got {args.weights!r}") from None
    if len(c) != 3:
        raise ConfigError("--weights needs exactly c1,c2,c3")
    return FitnessWeights(*c, lam=args.lam, m_cap=args.mcap)


def _qpr_layout(spins: int):
    """Largest power-of-two block of leading labels on a chain of ``spins``."""
    k = 1 << (spins.bit_length() - 1)
    return tuple(range(1, k + 1))


# -- commands -------------------------------------------------------------------------

def cmd_build(args) -> int:
    motif = _load_motif(args)
    graphs = resolve(motif)
    prog = _compile(args, motif)
    out = _out(args)
    params = np.zeros(prog.n_params)
    (out / "graphs.json").write_text(graphs_to_json(graphs, indent=2) + "\n")
    _write_json(out / "motif.json", motif_to_dict(motif))
    (out / "circuit.qasm").write_text(to_qasm(prog, params))
    summary = {"primitives": len(graphs), "unitaries": count_unitaries(graphs),
               "n_params": prog.n_params, "param_counts": prog.param_counts(),
               "num_qubits": prog.num_qubits, "readout": prog.readout}
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary))
    return 0


def cmd_draw(args) -> int:
    dot = to_dot(resolve(_load_motif(args)))
    (_out(args) / "motif.dot").write_text(dot)
    print(dot, end="")
    return 0


def cmd_train(args) -> int:
    from .estimator import QCNNClassifier
    from .training import Dataset, write_history

    if not args.data:
        raise ConfigError("train needs --data")
    try:
        ds = Dataset.from_csv(args.data).split(0.3, args.seed)
    except FileNotFoundError:
        raise ConfigError(f"dataset {args.data} not found") from None
    motif = _load_motif(args)
    clf = QCNNClassifier(motif=motif, conv_mapping=args.conv_mapping,
                         pool_mapping=args.pool_mapping, encoding=args.encoding,
                         optimizer=args.optimizer, learning_rate=args.lr, epochs=args.epochs,
                         batch_size=args.batch_size, gradient=args.gradient,
                         readout=args.readout, validation_fraction=args.val_fraction,
                         random_state=args.seed)
    Xtr, ytr = ds.X[ds.train_idx], ds.y[ds.train_idx]
    Xte, yte = ds.X[ds.test_idx], ds.y[ds.test_idx]
    clf.fit(Xtr, ytr)
    out = _out(args)
    write_history(clf.history_, out / "history.csv")
    metrics = {"train_accuracy": clf.score(Xtr, ytr), "test_accuracy": clf.score(Xte, yte),
               "n_params": clf.program_.n_params, "best_epoch": clf.fit_result_.best_epoch}
    if args.folds > 1:
        from sklearn.model_selection import StratifiedKFold, cross_val_score
        folds = StratifiedKFold(args.folds, shuffle=True, random_state=args.seed)
        scores = cross_val_score(clf, Xtr, ytr, cv=folds)
        metrics["cv_accuracy"] = [float(s) for s in scores]
    _write_json(out / "metrics.json", metrics)
    _write_json(out / "params.json", {"motif": motif_to_dict(motif),
                                      "params": clf.params_.tolist(),
                                      "conv_mapping": args.conv_mapping,
                                      "pool_mapping": args.pool_mapping})
    print(json.dumps(metrics))
    return 0


def cmd_sweep(args) -> int:
    from .sweep import SweepSpace, sweep, write_long_csv, write_table_csv
    from .training import Dataset

    space = SweepSpace()
    if args.space:
        try:
            space = SweepSpace.from_dict(json.loads(Path(args.space).read_text()))
        except FileNotFoundError:
            raise ConfigError(f"space file {args.space} not found") from None
    print(f"{len(space)} architectures")
    if args.dry_run:
        return 0
    if not args.data:
        raise ConfigError("sweep needs --data (or --dry-run)")
    try:
        ds = Dataset.from_csv(args.data)
    except FileNotFoundError:
        raise ConfigError(f"dataset {args.data} not found") from None
    seeds = tuple(range(args.seed, args.seed + args.repeats))
    results = sweep(space, ds.X, ds.y, n_qubits=args.qubits, seeds=seeds,
                    workers=args.workers, encoding=args.encoding, epochs=args.epochs,
                    learning_rate=args.lr, pool_mapping=args.pool_mapping)
    out = _out(args)
    write_long_csv(results, out / "sweep.csv")
    write_table_csv(results, out / "sweep_table.csv")
    failed = sum(r.status != "ok" for r in results)
    print(f"done: {len(results) - failed} ok, {failed} failed")
    return 0


def cmd_qpr_train(args) -> int:
    from .qpr import GroundStateCache, train_line
    from .training import TrainConfig, write_history

    spins = args.spins
    if args.motif:
        motif = _load_motif(args)
    else:
        motif = reverse_binary_tree(_qpr_layout(spins), args.conv_stride, args.pool_stride,
                                    args.filter)
    prog = _compile(args, motif, num_qubits=spins)
    cache = GroundStateCache(args.cache)
    best = None
    for seed in range(args.seed, args.seed + args.repeats):
        cfg = TrainConfig(optimizer=args.optimizer, learning_rate=args.lr, epochs=args.epochs,
                          gradient=args.gradient, seed=seed)
        res, acc = train_line(prog, spins, args.points, cfg, cache)
        log.info("seed %d: train-line accuracy %.3f", seed, acc)
        if best is None or acc > best[1]:
            best = (res, acc, seed)
    res, acc, seed = best
    out = _out(args)
    write_history(res.history, out / "history.csv")
    _write_json(out / "params.json", {
        "motif": motif_to_dict(motif), "params": res.params.tolist(), "spins": spins,
        "conv_mapping": args.conv_mapping, "pool_mapping": args.pool_mapping,
        "readout": prog.readout})
    metrics = {"train_accuracy": acc, "seed": seed, "n_params": prog.n_params}
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics))
    return 0


def cmd_qpr_search(args) -> int:
    from .qpr import Regions
    from .search import QPRFitness, SearchConfig, run_search

    weights = _parse_weights(args)
    workers = 1 if args.deterministic else args.workers
    cfg = SearchConfig(n_qubits=args.spins, pool_size=args.pool, pressure=args.pressure,
                       generations=args.generations, time_limit=args.time_limit,
                       seed=args.seed, workers=workers, weights=weights,
                       train_epochs=args.epochs)
    regions = Regions.from_csv(args.regions) if args.regions else None
    fit_fn = QPRFitness(args.spins, weights, regions, epochs=args.epochs,
                        learning_rate=args.lr, seed=args.seed, cache_dir=args.cache)
    out = _out(args)
    result = run_search(cfg, fit_fn, log_path=out / "events.jsonl", resume=args.resume)
    best = result.best
    _write_json(out / "best.json", best.to_record())
    summary = {"best_fitness": best.fitness, "best_id": best.id,
               "initial_best": result.best_curve[0], "table_size": len(result.table),
               "skips": result.skips}
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary))
    return 0


def cmd_phase_diagram(args) -> int:
    from .qpr import GroundStateCache, Regions, phase_diagram

    if not args.params:
        raise ConfigError("phase-diagram needs --params (written by qpr-train)")
    try:
        data = json.loads(Path(args.params).read_text())
    except FileNotFoundError:
        raise ConfigError(f"params file {args.params} not found") from None
    motif = motif_from_dict(data["motif"])
    spins = data.get("spins", args.spins)
    prog = compile_program(resolve(motif), conv_mapping=data.get("conv_mapping", "u_ttn"),
                           pool_mapping=data.get("pool_mapping", "pool_crz_crx"),
                           readout=data.get("readout"), num_qubits=spins)
    try:
        rows, cols = (int(x) for x in args.grid.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--grid must look like 16x16, got {args.grid!r}") from None
    regions = Regions.from_csv(args.regions) if args.regions else Regions.default()
    grid = phase_diagram(prog, np.asarray(data["params"]), spins, shape=(rows, cols),
                         h1_range=args.h1_range, h2_range=args.h2_range, regions=regions,
                         cache=GroundStateCache(args.cache))
    out = _out(args)
    grid.to_csv(out / "phase_diagram.csv")
    print(f"wrote {rows * cols} points to {out / 'phase_diagram.csv'}")
    return 0


# -- parser ----------------------------------------------------------------------------

def _motif_args(p):
    p.add_argument("--motif", help="inline motif expression or a motif JSON file")
    p.add_argument("--qubits", type=int, default=8, help="reverse-binary-tree width")
    p.add_argument("--conv-stride", type=int, default=1)
    p.add_argument("--pool-stride", type=int, default=0)
    p.add_argument("--filter", default="right")
    p.add_argument("--conv-mapping", default="u_ttn")
    p.add_argument("--pool-mapping", default="pool_crz_crx")
    p.add_argument("--readout", type=int, default=None)


def _train_args(p, epochs=100, lr=0.01):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--optimizer", default="adam", choices=["adam", "gradient_descent"])
    p.add_argument("--gradient", default="adjoint",
                   choices=["adjoint", "parameter_shift", "finite_difference"])
    p.add_argument("--batch-size", type=int, default=None)


GLOBAL_DEFAULTS = {"seed": 0, "out": "motiq_out", "config": None, "verbose": False}


def _global_args(p, suppress: bool):
    d = (lambda k: argparse.SUPPRESS) if suppress else GLOBAL_DEFAULTS.get
    p.add_argument("--seed", type=int, default=d("seed"))
    p.add_argument("--out", default=d("out"), help="output directory")
    p.add_argument("--config", default=d("config"), help="JSON file of option defaults")
    p.add_argument("-v", "--verbose", action="store_true", default=d("verbose"))


def build_parser() -> argparse.ArgumentParser:
    # globals may sit before or after the subcommand; the subcommand copy
    # suppresses its defaults so it never overwrites an earlier value
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, suppress=True)

    parser = argparse.ArgumentParser(prog="motiq",
                                     description="Hierarchical QCNN architectures.")
    _global_args(parser, suppress=False)
    sub = parser.add_subparsers(dest="task", required=True)

    p = sub.add_parser("build", parents=[common], help="resolve and compile a motif")
    _motif_args(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("draw", parents=[common], help="DOT graph of a motif")
    _motif_args(p)
    p.set_defaults(func=cmd_draw)

    p = sub.add_parser("train", parents=[common], help="train a classifier on a CSV dataset")
    _motif_args(p)
    _train_args(p)
    p.add_argument("--data")
    p.add_argument("--encoding", default="qubit", choices=["qubit", "iqp", "amplitude"])
    p.add_argument("--folds", type=int, default=1)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="sweep the reverse-binary-tree family")
    p.add_argument("--data")
    p.add_argument("--space", help="JSON with conv_strides, pool_strides, filters, ansatzes")
    p.add_argument("--qubits", type=int, default=8)
    p.add_argument("--encoding", default="qubit", choices=["qubit", "iqp", "amplitude"])
    p.add_argument("--pool-mapping", default="pool_crz_crx")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--repeats", type=int, default=1, help="seeds per architecture")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dry-run", action="store_true", help="only count architectures")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("qpr-train", parents=[common], help="train on the h2=0 line")
    _motif_args(p)
    _train_args(p, epochs=DESK_SCALE["epochs"], lr=DESK_SCALE["learning_rate"])
    p.set_defaults(filter=DESK_SCALE["filter"], conv_mapping=DESK_SCALE["conv_mapping"])
    p.add_argument("--spins", type=int, default=9)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--repeats", type=int, default=3, help="seeds tried, best kept")
    p.add_argument("--cache", help="directory for cached ground states")
    p.set_defaults(func=cmd_qpr_train)

    p = sub.add_parser("qpr-search", parents=[common], help="evolutionary architecture search")
    p.add_argument("--spins", type=int, default=7)
    p.add_argument("--pool", type=int, default=100)
    p.add_argument("--pressure", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--deterministic", action="store_true", help="force a single worker")
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--weights", default="0.7,0.05,0.25")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mcap", type=float, default=500.0)
    p.add_argument("--epochs", type=int, default=DESK_SCALE["search_epochs"],
                   help="training budget per genotype")
    p.add_argument("--lr", type=float, default=DESK_SCALE["learning_rate"])
    p.add_argument("--regions", help="CSV of h1,h2,tag")
    p.add_argument("--cache", help="directory for cached ground states")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_qpr_search)

    p = sub.add_parser("phase-diagram", parents=[common], help="evaluate a trained circuit")
    p.add_argument("--params", help="params.json written by qpr-train")
    p.add_argument("--spins", type=int, default=9)
    p.add_argument("--grid", default="16x16")
    p.add_argument("--h1-range", type=float, nargs=2, default=(0.0, 1.6))
    p.add_argument("--h2-range", type=float, nargs=2, default=(-1.6, 1.6))
    p.add_argument("--regions", help="CSV of h1,h2,tag")
    p.add_argument("--cache", help="directory for cached ground states")
    p.set_defaults(func=cmd_phase_diagram)
    return parser


def _apply_config(parser, argv):
    """Re-parse with values from ``--config`` as defaults; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {args.config} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    cfg.pop("task", None)
    unknown = set(cfg) - set(vars(args))
    if unknown:
        raise ConfigError(f"unknown config keys for {args.task}: {sorted(unknown)}")
    glob = {k: cfg.pop(k) for k in list(cfg) if k in GLOBAL_DEFAULTS}
    parser.set_defaults(**glob)
    sub = parser._subparsers._group_actions[0].choices[args.task]
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FloatingPointError as exc:
        print(f"motiq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"motiq: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
