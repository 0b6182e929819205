"""Command-line entry point: ``newsfactor {prepare,train,predict,backtest,report}``.

Settings come from an optional ``--config`` file of ``key=value`` lines;
flags given on the command line win. Exit codes: 0 success, 1 unexpected
failure, 2 bad configuration, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import DataError, DimensionError, NumericalError, UndefinedMetricError
from .io import output_lock

log = logging.getLogger("newsfactor")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

# flag dest -> RunConfig key
_FLAG_KEYS = {
    "out": "out", "prices": "prices", "counts": "counts", "data_dir": "data_dir", "model_dir": "model_dir",
    "reference": "reference", "seed": "seed", "d": "d", "lam": "lam", "mu": "mu", "rho": "rho",
    "max_iters": "max_iters", "tol": "tol", "window": "window", "z_threshold": "z_threshold",
    "z_mode": "z_mode", "split": "split", "range": "eval_range", "baselines": "baselines",
    "ar_order": "ar_order", "mvp_basis": "mvp_basis",
}

_REQUIRED_PATHS = {
    "prepare": ("prices", "counts"),
    "train": (),
    "predict": (),
    "backtest": ("reference",),
    "report": (),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run settings")
    g.add_argument("--config", help="key=value file; command-line flags override it")
    g.add_argument("--out", help="run directory (default: run)")
    g.add_argument("--prices", help="CSV with header date,ticker,open,close")
    g.add_argument("--counts", help="CSV with header date,word,doc_count")
    g.add_argument("--data-dir", dest="data_dir", help="prepared dataset (default: OUT/data)")
    g.add_argument("--model-dir", dest="model_dir", help="fitted model (default: OUT/model)")
    g.add_argument("--reference", help="CSV date,value of a benchmark index level")
    g.add_argument("--seed", type=int)
    g.add_argument("--d", type=int, help="number of latent factors")
    g.add_argument("--lambda", dest="lam", type=float, help="group-lasso weight")
    g.add_argument("--mu", type=float, help="elementwise lasso weight")
    g.add_argument("--rho", type=float, help="ADMM penalty parameter")
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--tol", type=float, help="relative primal-residual tolerance")
    g.add_argument("--window", type=int, help="trailing days for word z-scores")
    g.add_argument("--z-threshold", dest="z_threshold", type=float)
    g.add_argument("--z-mode", dest="z_mode", choices=["threshold", "clip"])
    g.add_argument("--split", help="B1,B2: train days 1..B1, validation B1+1..B2, test after")
    g.add_argument("--range", choices=["train", "val", "test"], help="days to predict/backtest")
    g.add_argument("--baselines", help="comma list, 'all' or 'none'")
    g.add_argument("--ar-order", dest="ar_order", type=int)
    g.add_argument("--mvp-basis", dest="mvp_basis", choices=["pooled", "means"])
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="newsfactor", description="News-driven stock return factor model.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="compute returns and word intensities")
    sub.add_parser("train", parents=[common], help="fit U and W on the training days")
    sub.add_parser("predict", parents=[common], help="forecast returns and score directions")
    sub.add_parser("backtest", parents=[common], help="simulate the strategy and benchmarks")
    sub.add_parser("report", parents=[common], help="write plot-ready tables")
    return parser


def resolve_config(args) -> pipeline.RunConfig:
    """Merge the config file with explicit flags and check referenced paths."""
    overrides = {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    if args.config:
        if not Path(args.config).is_file():
            raise ValueError(f"config file {args.config} not found")
        cfg = pipeline.RunConfig.from_file(args.config, overrides)
    else:
        cfg = pipeline.RunConfig.from_mapping(overrides)
    needed = _REQUIRED_PATHS[args.command]
    for key in needed:
        path = getattr(cfg, key)
        if path is None:
            if key == "reference":
                continue
            raise ValueError(f"{args.command} needs --{key}")
        if not Path(path).is_file():
            raise ValueError(f"--{key} file {path} does not exist")
    return cfg


_STAGES = {
    "prepare": pipeline.run_prepare,
    "train": pipeline.run_train,
    "predict": pipeline.run_predict,
    "backtest": pipeline.run_backtest,
    "report": pipeline.run_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, TypeError) as exc:
        print(f"newsfactor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with output_lock(cfg.out):
            _STAGES[args.command](cfg)
    except (DataError, DimensionError, UndefinedMetricError, FileNotFoundError) as exc:
        print(f"newsfactor: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"newsfactor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RuntimeError as exc:
        print(f"newsfactor: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"newsfactor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished; outputs under %s", args.command, cfg.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
