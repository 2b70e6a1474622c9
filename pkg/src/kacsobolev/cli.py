"""Command-line entry point: ``kacsobolev {bound-report,converge,tail-check}``."""
import argparse
import logging
import sys

from . import _pairs
from .config import load_config
from .errors import ConfigError, DomainError, InvariantViolation, NumericError
from .experiments import run_bound_report, run_bound_vs_empirical, run_convergence_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = {
    "bound-report": lambda cfg, threads: run_bound_report(cfg),
    "converge": run_convergence_experiment,
    "tail-check": run_bound_vs_empirical,
}


def build_parser():
    p = argparse.ArgumentParser(prog="kacsobolev",
                                description="Kac particle system experiments and bounds")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out", default=None, metavar="DIR", help="override the output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        cfg = load_config(args.config).with_overrides(args.seed, args.out)
        _pairs.set_threads(args.threads)
        threads = _pairs.get_threads()
        COMMANDS[args.command](cfg, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, InvariantViolation, DomainError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: wrote results to {cfg.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
