"""Command-line entry point: ``isac-uav {fig6,fig7,fig8,encounter,all}``.

Exit status: 0 success, 2 invalid configuration or arguments,
3 experiment failed its own consistency checks.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ScenarioConfig, parse_config
from .exceptions import ConfigError, ExperimentError
from .harness import EXPERIMENTS, run_experiments

OUT_ENV = "ISAC_UAV_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3
COMMANDS = {**{name: [name] for name in EXPERIMENTS}, "all": list(EXPERIMENTS)}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (INI sections)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per configuration")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./results)")
    common.add_argument("--workers", type=int, help="worker processes for trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="isac-uav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else ScenarioConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "trials", "workers") if getattr(args, k) is not None}
    return replace(cfg, **overrides) if overrides else cfg


def resolve_out(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, "results"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = resolve_out(args)
    try:
        reports = run_experiments(COMMANDS[args.command], cfg, out)
    except ExperimentError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for rep in reports:
        status = "FAILED" if rep.failed else "ok"
        print(f"{rep.name}: {status} ({rep.duration_s:.1f} s) -> {', '.join(str(p) for p in rep.csv_paths)}")
    print(f"summary: {out / 'summary.txt'}")
    return EXIT_FAILED if any(rep.failed for rep in reports) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
