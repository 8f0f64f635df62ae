#!/usr/bin/env python3
"""
udep - marginal (HSIC) and conditional (C-HSIC) dependence from the command line.

    python udep.py sweep --model mplus --measures hsic,chsic,chsic-random --alpha 4,64 --gamma-db -10:20:2
    python udep.py sweep --model mminus --L 100,200,300,400,500,600 --gamma-db-fixed 10
    python udep.py measure --input data.csv --alpha 4 [--random-pruning]
    python udep.py generate --model mplus --gamma-db 10 --L 100 --seed 7 --out data.csv
    python udep.py budget --L 100,600 --alpha 4,64
    python udep.py self-test

Exit codes: 0 success, 2 config error, 3 data error, 4 I/O error.
"""

import argparse
import logging
import os
import re
import sys
import traceback
from pathlib import Path

from tabulate import tabulate

import harness
from errors import UdepError
from measures import chsic, default_kernels, hsic
from pairs import CONFOUNDER, RANDOM, max_pairs, pair_budget, prune
from synth import MODELS, ModelConfig, generate, read_dataset_csv, write_dataset_csv

__version__ = "0.3.0"

LOG_DIR = os.getenv("UDEP_LOG_DIR", "./logs")


def setup_logging(log_dir=LOG_DIR, verbose=False):
    """Set up logging to both console and file."""
    level = logging.DEBUG if verbose else logging.INFO
    logger = logging.getLogger()
    logger.setLevel(level)

    # Clear any existing handlers
    logger.handlers.clear()

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    simple_formatter = logging.Formatter('%(message)s')

    try:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(log_dir, "udep.log"), mode='a')
        file_handler.setLevel(level)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)
    except OSError as e:
        print(f"⚠️  Cannot write logs to {log_dir}: {e}", file=sys.stderr)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    return logging.getLogger("udep")


def _grid_arg(cast):
    def parse(text):
        try:
            return harness.parse_grid(text, cast)
        except UdepError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
    return parse


_float_list = _grid_arg(float)
_int_list = _grid_arg(int)

GRID_FLAGS = ("--gamma-db", "--alpha", "--L")
NEGATIVE_GRID = re.compile(r"^-[\d.]+([:,]-?[\d.]+)*$")


def join_negative_grids(argv):
    """Turn `--gamma-db -10:20:2` into `--gamma-db=-10:20:2` so argparse reads a value."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in GRID_FLAGS and i + 1 < len(argv) and NEGATIVE_GRID.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="udep", description="Kernel dependence and pruned-U-statistic conditional dependence")
    parser.add_argument("--version", action="version", version=f"udep {__version__}")
    parser.add_argument("--log-dir", default=LOG_DIR, help="Directory for udep.log (env UDEP_LOG_DIR)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="No progress bar")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep over gamma or L")
    sw.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    sw.add_argument("--model", choices=MODELS)
    sw.add_argument("--measures", help=f"Comma list from {','.join(harness.MEASURES)}")
    sw.add_argument("--alpha", dest="alphas", type=_float_list, help="Comma list of alpha values")
    sw.add_argument("--gamma-db", dest="gamma_grid", type=_float_list,
                    help="Gamma grid in dB, 'start:stop:step' or list")
    sw.add_argument("--L", dest="L_grid", type=_int_list, help="L grid, list or 'start:stop:step'")
    sw.add_argument("--gamma-db-fixed", dest="gamma_db_fixed", type=float, help="Gamma (dB) for an L sweep")
    sw.add_argument("--L-fixed", dest="L_fixed", type=int, help="L for a gamma sweep")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--seed", dest="master_seed", type=int)
    sw.add_argument("--out", dest="out_dir", help="Output directory")
    sw.add_argument("--jobs", type=int, help="Parallel trial workers (joblib)")
    sw.add_argument("--no-chart", action="store_true", help="Skip the SVG chart")

    me = sub.add_parser("measure", help="HSIC and C-HSIC of a CSV with columns x,y,z")
    me.add_argument("--input", required=True)
    me.add_argument("--alpha", type=float, required=True)
    me.add_argument("--random-pruning", action="store_true", help="Prune pairs at random instead of by z")
    me.add_argument("--seed", type=int, default=0, help="Seed for random pruning")

    ge = sub.add_parser("generate", help="Write a synthetic dataset as CSV")
    ge.add_argument("--model", choices=MODELS, required=True)
    ge.add_argument("--gamma-db", type=float, required=True)
    ge.add_argument("--L", type=int, required=True)
    ge.add_argument("--seed", type=int, default=0)
    ge.add_argument("--out", required=True)

    bu = sub.add_parser("budget", help="Pair budget K and fraction of all pairs")
    bu.add_argument("--L", type=_int_list, required=True)
    bu.add_argument("--alpha", type=_float_list, required=True)

    sub.add_parser("self-test", help="Finite-M convergence and identity checks")
    return parser


def cmd_sweep(args, logger):
    cfg = harness.ExperimentConfig()
    if args.config:
        cfg = harness.ExperimentConfig.from_mapping(harness.load_config(args.config))
    cfg = cfg.with_overrides(
        model=args.model, measures=args.measures, alphas=args.alphas,
        gamma_grid=args.gamma_grid, L_grid=args.L_grid, gamma_db_fixed=args.gamma_db_fixed,
        L_fixed=args.L_fixed, trials=args.trials, master_seed=args.master_seed,
        out_dir=args.out_dir, jobs=args.jobs,
    ).validate()

    logger.info("=" * 60)
    logger.info(f"SWEEP {cfg.model} over {cfg.sweep_name} ({cfg.trials} trials, seed {cfg.master_seed})")
    logger.info("=" * 60)
    result = harness.sweep(cfg, progress=not args.quiet and sys.stderr.isatty())
    csv_path = harness.write_csv(result, Path(cfg.out_dir) / f"{cfg.model}_{cfg.sweep_name}.csv")
    logger.info(f"📊 Results: {csv_path}")
    if not args.no_chart:
        chart = harness.render_chart(result, harness.chart_path(cfg.out_dir, result))
        logger.info(f"📈 Chart: {chart}")
    return 0


def cmd_measure(args, logger):
    ds = read_dataset_csv(args.input)
    mode = RANDOM if args.random_pruning else CONFOUNDER
    kx, ky = default_kernels(ds.x, ds.y)
    sel = prune(ds.z, args.alpha, mode, args.seed)
    results = [hsic(ds.x, ds.y, kx, ky), chsic(ds.x, ds.y, sel, kx, ky)]
    logger.info(f"📊 {args.input}: L={ds.L}, bandwidth x={kx.bandwidth:.4g}, y={ky.bandwidth:.4g}")
    rows = [(r.measure, r.mode, "" if r.alpha is None else f"{r.alpha:g}",
             "" if r.K is None else r.K, f"{r.value:.6g}") for r in results]
    print(tabulate(rows, headers=["measure", "mode", "alpha", "K", "value"]))
    return 0


def cmd_generate(args, logger):
    ds = generate(ModelConfig(args.model, args.gamma_db, args.L), args.seed)
    path = write_dataset_csv(ds, args.out)
    logger.info(f"✅ Wrote {ds.L} samples of {args.model} (gamma={args.gamma_db:g} dB) to {path}")
    return 0


def cmd_budget(args, logger):
    rows = []
    for L in args.L:
        for alpha in args.alpha:
            K = pair_budget(L, alpha)
            rows.append((L, f"{alpha:g}", K, max_pairs(L), f"{100.0 * K / max_pairs(L):.1f}%"))
    print(tabulate(rows, headers=["L", "alpha", "K", "K_max", "kept"]))
    return 0


def cmd_self_test(args, logger):
    report = harness.self_test()
    print(report.table())
    print(f"\n{'✅ ALL CHECKS PASSED' if report.passed else '❌ SOME CHECKS FAILED'}")
    return 0 if report.passed else 1


COMMANDS = {
    "sweep": cmd_sweep,
    "measure": cmd_measure,
    "generate": cmd_generate,
    "budget": cmd_budget,
    "self-test": cmd_self_test,
}


def main(argv=None):
    parser = build_parser()
    argv = join_negative_grids(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on bad flags, which is the config-error code
        return e.code if isinstance(e.code, int) else 2
    logger = setup_logging(args.log_dir, args.verbose)
    try:
        return COMMANDS[args.command](args, logger)
    except UdepError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"❌ Unexpected error: {e}")
        logger.error(f"Traceback: {traceback.format_exc()}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
