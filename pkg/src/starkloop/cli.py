"""Command-line entry point: ``starkloop <experiment> --config <path>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from starkloop.config import EXPERIMENTS, ExperimentConfig
from starkloop.errors import ConfigError, StarkloopError

OUT_ENV = "STARKLOOP_OUT"
DEFAULT_OUT = "results"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("starkloop")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starkloop",
                                description="Run one simulation experiment and write its data tables.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat TOML file; omitted keys take their defaults")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--n-max", type=int, dest="n_max", help="override the harmonic truncation")
    p.add_argument("--threads", type=int, default=None, help="limit BLAS threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {"experiment": args.experiment}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n_max is not None:
        changes["n_max"] = args.n_max
    out = args.out or cfg.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT
    changes["out_dir"] = out
    return cfg.replace(**changes)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    from starkloop.experiments import run_experiment

    try:
        with threadpool_limits(limits=args.threads):
            bundle = run_experiment(cfg, cfg.out_dir)
    except (StarkloopError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure in {cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wrote %s tables to %s", len(bundle.tables), cfg.out_dir)
    print(os.path.join(cfg.out_dir, cfg.experiment))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
