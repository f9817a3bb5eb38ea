"""``python -m toricsim <subcommand> --config run.json [--seed N] [--workers N] [--out DIR]``.

Subcommands map onto experiment kinds; the config document may omit the
``experiment`` key.  ``TORICSIM_WORKERS`` overrides the worker count when
``--workers`` is not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, parse_config
from .runner import ExperimentError, run

SUBCOMMANDS = {
    "generate-lattice": "generate_lattice",
    "threshold": "static_threshold",
    "dynamics": "dynamics",
    "walk": "walk",
    "bound": "bound",
    "decode": "decode",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="python -m toricsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {experiment} experiment")
        p.add_argument("--config", type=Path, help="flat JSON config document")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--workers", type=int, help="worker processes (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    text = args.config.read_text() if args.config else ""
    workers = args.workers
    if workers is None and os.environ.get("TORICSIM_WORKERS"):
        workers = int(os.environ["TORICSIM_WORKERS"])
    try:
        config = parse_config(text, experiment, master_seed=args.seed, workers=workers, output=args.out)
        if config.experiment != experiment:
            raise ConfigError(f"experiment: config says {config.experiment!r} but the subcommand is {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        files = run(config)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
