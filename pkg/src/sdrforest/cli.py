"""Command line interface: ``sdrforest <command> [options]``.

Exit status is 0 on success, 2 on usage errors and 1 when the data or a
model file is rejected.
"""

import argparse
import csv
import logging
import sys
import warnings

import numpy as np

from . import io
from .errors import DataMismatch, SdrForestError
from .eval.bench import (LSVI_METHODS, METHODS, LsviConfig, PredictiveConfig, run_lsvi_bench,
                         run_predictive_bench)
from .eval.simulations import PROBLEMS, SimulationSpec, gen_simulation
from .forest import fingerprint, fit_forest, kernel_from_leaves, oob_mse, permutation_importance
from .lsvi import lsvi_from_weights
from .tree import FitParams, resolve_m_try

logger = logging.getLogger("sdrforest")


def _mtry(s):
    try:
        resolve_m_try(s, 10**9)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    return s


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _slices(s):
    v = int(s)
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 slices, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdrforest", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("fit", help="fit a forest on a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trees", type=_positive, default=500)
    p.add_argument("--mtry", type=_mtry, default="all",
                   help="integer, all, sqrt or third (default all)")
    p.add_argument("--min-leaf", type=_positive, default=5, dest="min_leaf",
                   help="nodes smaller than this are not split")
    p.add_argument("--slices", type=_slices, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--no-sdr", action="store_true", dest="no_sdr",
                   help="axis-aligned splits only (bagged CART)")
    p.add_argument("--workers", type=_positive, default=1)

    p = sub.add_parser("predict", help="predict rows of a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")

    for name, text in (("kernel", "forest kernel weights of query rows against training rows"),
                       ("lsvi", "local importance direction at each query row")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True, help="the training CSV")
        p.add_argument("--query", required=True)
        p.add_argument("--out", default="-")

    p = sub.add_parser("importance", help="out-of-bag permutation importance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="the training CSV")
    p.add_argument("--repeats", type=_positive, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("simulate", help="write a simulated dataset")
    p.add_argument("--name", required=True, choices=sorted(PROBLEMS))
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--p", type=_positive, default=None)
    p.add_argument("--seed", type=int, default=0)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--sigma", type=float, default=None)
    noise.add_argument("--snr", type=_positive_float, default=None)
    p.add_argument("--out", default="-")

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", required=True, choices=("predictive", "lsvi"))
    p.add_argument("--full", action="store_true", help="full-scale replicates and grid")
    p.add_argument("--simulations", nargs="+", default=None)
    p.add_argument("--methods", nargs="+", default=None)
    p.add_argument("--replicates", type=_positive, default=None)
    p.add_argument("--trees", type=_positive, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--out", default="-")
    p.add_argument("--summary", default=None, help="optional CSV of per-method summaries")
    return ap


def _write(path, columns, rows):
    if path == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    else:
        io.write_table(path, columns, rows)


def _load_inputs(model_path, data_path, target_needed=False):
    forest = io.load_model(model_path)
    target = forest.target_name if target_needed else None
    data, _ = io.read_dataset(data_path, target=target, columns=forest.feature_names)
    X = data.X
    if forest.standardization is not None:
        X = forest.standardization.apply(X)
    return forest, data, X


def _check_training(forest, X, y):
    fp = fingerprint(X, y)
    if fp != forest.fingerprint:
        raise DataMismatch("data does not match the model's training set "
                           f"(expected {forest.fingerprint}, got {fp})")


def cmd_fit(args):
    data, std = io.read_dataset(args.data, target=args.target, standardize=args.standardize)
    p = data.X.shape[1]
    params = FitParams(n_min=args.min_leaf, m_try=resolve_m_try(args.mtry, p),
                       n_slices=args.slices, use_sdr=not args.no_sdr)
    logger.info("resolved m_try=%d for p=%d; params=%s", params.m_try, p, params)
    forest = fit_forest(data.X, data.y, params, n_trees=args.trees, seed=args.seed,
                        workers=args.workers, feature_names=data.feature_names,
                        target_name=data.target_name, standardization=std)
    io.save_model(forest, args.out)
    logger.info("wrote %d trees to %s", forest.n_trees, args.out)


def cmd_predict(args):
    forest, data, X = _load_inputs(args.model, args.data)
    pred = forest.predict(X)
    _write(args.out, ["prediction"], ([float(v)] for v in pred))


def _training_and_queries(args):
    forest, train, X = _load_inputs(args.model, args.data, target_needed=True)
    _check_training(forest, X, train.y)
    query, _ = io.read_dataset(args.query, columns=forest.feature_names)
    Q = query.X
    if forest.standardization is not None:
        Q = forest.standardization.apply(Q)
    return forest, X, Q


def cmd_kernel(args):
    forest, X, Q = _training_and_queries(args)
    K = kernel_from_leaves(forest.apply(Q), forest.apply(X))
    _write(args.out, [f"w{i}" for i in range(X.shape[0])], K.tolist())


def cmd_lsvi(args):
    forest, X, Q = _training_and_queries(args)
    W = kernel_from_leaves(forest.apply(Q), forest.apply(X))
    names = forest.feature_names or [f"x{j}" for j in range(forest.n_features)]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(Q.shape[0]):
            r = lsvi_from_weights(X, Q[i], W[i])
            rows.append([float(v) for v in r.direction]
                        + [r.min_eigenvalue, r.weight_mass, int(r.rank_collapse)])
    _write(args.out, names + ["min_eigenvalue", "weight_mass", "rank_collapse"], rows)


def cmd_importance(args):
    forest, train, X = _load_inputs(args.model, args.data, target_needed=True)
    _check_training(forest, X, train.y)
    base = oob_mse(forest, X, train.y)
    imp = permutation_importance(forest, X, train.y, seed=args.seed, repeats=args.repeats)
    names = forest.feature_names or [f"x{j}" for j in range(forest.n_features)]
    _write(args.out, ["feature", "importance", "relative"],
           ([n, float(v), float(v / base)] for n, v in zip(names, imp)))


def cmd_simulate(args):
    spec = SimulationSpec(args.name, args.n, p=args.p, sigma=args.sigma, snr=args.snr,
                          seed=args.seed)
    logger.info("simulation spec %s (p=%d, noise sd=%.6g)", spec, spec.dim, spec.noise_sd())
    sim = gen_simulation(spec)
    names = [f"x{j + 1}" for j in range(sim.X.shape[1])]
    _write(args.out, names + ["y"],
           (list(map(float, x)) + [float(v)] for x, v in zip(sim.X, sim.y)))


def cmd_bench(args):
    kw = {"seed": args.seed, "workers": args.workers}
    if args.simulations:
        kw["simulations"] = tuple(args.simulations)
    if args.methods:
        kw["methods"] = tuple(args.methods)
    if args.replicates:
        kw["replicates"] = args.replicates
    if args.trees:
        kw["n_trees"] = args.trees
    if args.suite == "predictive":
        cfg_cls, run, value, allowed = PredictiveConfig, run_predictive_bench, "improvement", METHODS
    else:
        cfg_cls, run, value, allowed = LsviConfig, run_lsvi_bench, "trace_correlation", LSVI_METHODS
    for m in kw.get("methods", ()):
        if m not in allowed:
            raise SdrForestError(f"unknown method {m!r}; choose from {', '.join(allowed)}")
    for s in kw.get("simulations", ()):
        if s not in PROBLEMS:
            raise SdrForestError(f"unknown simulation {s!r}")
    config = cfg_cls.full(**kw) if args.full else cfg_cls(**kw)
    logger.info("bench config %s", config)
    result = run(config)
    rows = result.rows
    columns = list(rows[0]) if rows else []
    _write(args.out, columns, ([r[c] for c in columns] for r in rows))
    summary = result.summary(value)
    for s in summary:
        logger.info("%s %s: mean=%.4f sd=%.4f median=%.4f", s["simulation"], s["method"],
                    s["mean"], s["std"], s["median"])
    if args.summary:
        io.write_dicts(args.summary, summary)


COMMANDS = {
    "fit": cmd_fit, "predict": cmd_predict, "kernel": cmd_kernel, "lsvi": cmd_lsvi,
    "importance": cmd_importance, "simulate": cmd_simulate, "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.info("config %s", vars(args))
    try:
        COMMANDS[args.command](args)
    except (SdrForestError, OSError, ValueError) as e:
        print(f"sdrforest {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
