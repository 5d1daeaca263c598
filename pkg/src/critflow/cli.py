"""Command line front end: ``critflow <config-path> [--out DIR] [--seed N] [--threads N]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import COMMANDS, ConfigError, parse_config
from .runner import FAILURE, run_experiment

THREADS_ENV = "CRITFLOW_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critflow",
        description="Run one batch experiment described by a key = value configuration file.",
        epilog=f"commands: {', '.join(COMMANDS)}",
    )
    parser.add_argument("config", help="path to the configuration file")
    parser.add_argument("--out", help="output directory (default: the config's output key, else ./critflow-out)")
    parser.add_argument("--seed", type=int, help="override the configuration seed")
    parser.add_argument("--threads", type=int, help=f"FFT worker threads (fallback: ${THREADS_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def resolve_threads(arg: int | None) -> int | None:
    if arg is not None:
        if arg < 1:
            raise ValueError("--threads must be positive")
        return arg
    env = os.environ.get(THREADS_ENV)
    if env:
        value = int(env)
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be positive")
        return value
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        threads = resolve_threads(args.threads)
    except ValueError as exc:
        print(f"critflow: {exc}", file=sys.stderr)
        return FAILURE
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"critflow: cannot read {args.config}: {exc}", file=sys.stderr)
        return FAILURE
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"critflow: {args.config}: {exc}", file=sys.stderr)
        return FAILURE
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return run_experiment(cfg, args.out, threads, config_text=text)


if __name__ == "__main__":
    sys.exit(main())
