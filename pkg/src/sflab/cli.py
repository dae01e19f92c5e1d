"""Command line interface: sflab run <config>, sflab sweep <config>."""
from __future__ import annotations

import argparse
import sys

from . import runner


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="path to an INI config file")
    parser.add_argument(
        "--out",
        default="sflab-out",
        help="output directory for report.json, CSV tables, and SVG figures",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads for sweeps (default: SFLAB_THREADS or 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sflab",
        description="saddle-focus tangency laboratory: scenarios over model systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the scenario named in the config")
    _add_common(run_p)
    sweep_p = sub.add_parser("sweep", help="run the parameter sweep in the config")
    _add_common(sweep_p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return runner.run(args.config, args.out, args.threads)
    return runner.sweep(args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
