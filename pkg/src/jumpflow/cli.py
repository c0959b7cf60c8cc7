"""``jumpflow run`` and ``jumpflow validate``."""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import ConfigError, load_config
from .runner import run

SEED_ENV = "JUMPFLOW_SEED"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpflow", description="Config-driven Monte Carlo experiments.")
    p.add_argument("--version", action="version", version=f"jumpflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment named in a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help=f"master seed (overrides ${SEED_ENV} and the config)")
    r.add_argument("--out-dir", default=".", help="directory for report.csv, report.svg, manifest.txt")
    r.add_argument("--threads", type=int, default=1, help="worker threads; output does not depend on this")
    v = sub.add_parser("validate", help="check a config file and list every problem")
    v.add_argument("config")
    return p


def _seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV}={env!r} is not an integer")


def _load(path):
    try:
        cfg = load_config(path)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return None
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{path}: {e}", file=sys.stderr)
        return None
    for w in cfg.warnings:
        print(f"{path}: warning: {w}", file=sys.stderr)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if args.command == "validate":
        print(f"{args.config}: ok (experiment = {cfg.name})")
        return 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    seed = _seed(args.seed)
    try:
        result = run(cfg, args.out_dir, seed=seed, threads=args.threads)
    except OSError as exc:
        print(f"error: cannot write to {args.out_dir}: {exc.strerror}", file=sys.stderr)
        return 2
    if result.report is not None:
        print(result.report.summary())
    if result.status:
        print(f"FAILED: {result.reason}", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
