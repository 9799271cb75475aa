"""
Command-line entry point for the distributed ALM consensus simulator.

Usage:
    python main.py run --config configs/demo_quadratic.yaml --out out/demo
    python main.py run --config configs/demo_quadratic.yaml --set engine.eps_pri=1e-6 --set run.budget=50
    python main.py reproduce-table1 --data-dir datasets --out out/table1
    python main.py reproduce-table2 --config configs/table2_mnist.yaml --n 10,50 --lambda 0,1e-3 --budget 1000
    python main.py validate --out out/demo

Exit codes: 0 success, 2 stopped on the sweep budget or outer-loop limit, 1 error.
"""

import argparse
import logging
import sys
from pathlib import Path

from cli.commands import (
    EXIT_ERROR,
    cmd_reproduce_table1,
    cmd_reproduce_table2,
    cmd_run,
    cmd_validate,
)
from models.errors import ConfigError, DaldError
from utils.config import settings
from utils.logger import configure_logging
from utils.parse import parse_number_list

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser, *, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", help="YAML run configuration")
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override a config value, e.g. engine.eps_pri=1e-6 (repeatable)",
        )
        parser.add_argument("--seed", type=int, help="Run a single seed instead of run.seeds")
    parser.add_argument("--out", type=Path, help="Output directory (default: DALD_OUTPUT_DIR)")
    parser.add_argument("--data-dir", type=Path, help="Dataset directory (default: DALD_DATA_DIR)")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Distributed augmented-Lagrangian consensus optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="Run one configured experiment over its seeds"))

    table1 = sub.add_parser("reproduce-table1", help="Regression parity against the all-in-one baseline")
    _common(table1, config=False)
    table1.add_argument("--budget", type=int, default=1000, help="Inner-sweep budget per dataset")

    table2 = sub.add_parser("reproduce-table2", help="MNIST 3-vs-7 accuracy grid")
    _common(table2)
    table2.add_argument("--n", default="10,50", help="Comma-separated client counts")
    table2.add_argument("--lambda", dest="lambdas", default="0,1e-4,1e-3,1e-2", help="Comma-separated l1 weights")
    table2.add_argument("--budget", default="1000", help="Comma-separated inner-sweep budgets")

    _common(sub.add_parser("validate", help="Re-read artifacts in --out against their schemas"), config=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(settings.LOG_LEVEL, quiet=args.quiet)
    out_dir = args.out or settings.OUTPUT_DIR
    data_dir = args.data_dir or settings.DATA_DIR

    try:
        match args.command:
            case "run":
                return cmd_run(args.config, args.overrides, out_dir, data_dir, seed=args.seed)
            case "reproduce-table1":
                return cmd_reproduce_table1(out_dir, data_dir, budget=args.budget)
            case "reproduce-table2":
                return cmd_reproduce_table2(
                    args.config or "configs/table2_mnist.yaml",
                    args.overrides,
                    out_dir,
                    data_dir,
                    n_list=parse_number_list(args.n, int),
                    lambda_list=parse_number_list(args.lambdas, float),
                    budget_list=parse_number_list(args.budget, int),
                    seeds=[args.seed] if args.seed is not None else None,
                )
            case _:
                return cmd_validate(out_dir)
    except ConfigError as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except DaldError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
