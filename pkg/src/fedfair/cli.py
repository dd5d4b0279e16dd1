"""Command-line entry point: ``fedfair --method both --config sec5.cfg --out results/``."""

from __future__ import annotations

import argparse
import logging
import sys

from fedfair.experiment import run_experiment
from fedfair.rng import SEED_MAX


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fedfair", description="FedFAir vs FedAVG over a simulated fading channel")
    p.add_argument("--method", choices=("fedfair", "fedavg", "both"), default="both")
    p.add_argument("--config", metavar="PATH", help="key = value config file (defaults used when omitted)")
    p.add_argument("--out", metavar="DIR", default="results", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=_seed, metavar="U64", help="override the config seed")
    p.add_argument("--record-every", type=_positive, metavar="K", help="trace stride")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run_experiment(args.config, args.out, args.method, args.seed, args.record_every)


if __name__ == "__main__":
    sys.exit(main())
