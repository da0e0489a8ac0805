"""
Command-line interface
Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from nestedot import __version__
from nestedot.core.exceptions import EXIT_RUNTIME, NestedOTException
from nestedot.core.logging import setup_logging

from . import commands

logger = logging.getLogger(__name__)


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _order(text: str) -> float:
    value = _positive_float(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"order r must be >= 1, got {text}")
    return value


def _float_list(text: str) -> List[float]:
    return [_positive_float(item) for item in text.split(",") if item.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_sinkhorn_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=_positive_float, default=None, help="Row L1 marginal tolerance")
    parser.add_argument("--max-iter", type=_positive_int, default=None, help="Sinkhorn iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nestedot",
        description="Nested distance and entropic nested distance between scenario trees",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Override NESTEDOT_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser("gen", help="Generate a random scenario tree")
    gen.add_argument("--depth", type=int, required=True)
    gen.add_argument("--max-children", type=int, default=3)
    gen.add_argument("--value-dim", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--scale", type=float, default=1.0, help="Increment standard deviation")
    gen.add_argument("--root-scale", type=float, default=1.0, help="Root value standard deviation")
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(handler=commands.cmd_gen)

    validate = subparsers.add_parser("validate", help="Parse and validate a tree file")
    validate.add_argument("tree")
    validate.set_defaults(handler=commands.cmd_validate)

    pair = subparsers.add_parser("gen-pair", help="Write the two information-gap trees")
    pair.add_argument("left")
    pair.add_argument("right")
    pair.add_argument("--amplitude", type=_positive_float, default=1.0)
    pair.add_argument("--epsilon", type=float, default=0.1)
    pair.set_defaults(handler=commands.cmd_gen_pair)

    nd = subparsers.add_parser("nd", help="Nested distance between two trees")
    nd.add_argument("x")
    nd.add_argument("y")
    nd.add_argument("--r", type=_order, default=1.0)
    nd.add_argument("--entropic", action="store_true", help="Compute END_r with Sinkhorn subproblems")
    nd.add_argument("--gamma-divisor", type=_positive_float, default=None)
    nd.add_argument("--plain", action="store_true", help="Scale the kernel directly instead of in log domain")
    nd.add_argument("--on-max-iter", choices=["raise", "round"], default="raise")
    nd.add_argument("--method", choices=["simplex", "highs"], default=None)
    nd.add_argument("--workers", type=_positive_int, default=None, help="Defaults to NESTEDOT_THREADS")
    nd.add_argument("--report", default=None, help="Write a JSON report with stage cost tables")
    _add_sinkhorn_options(nd)
    nd.set_defaults(handler=commands.cmd_nd)

    wasserstein = subparsers.add_parser("wasserstein", help="Wasserstein distance of the path laws")
    wasserstein.add_argument("x")
    wasserstein.add_argument("y")
    wasserstein.add_argument("--r", type=_order, default=1.0)
    wasserstein.add_argument("--method", choices=["simplex", "highs"], default=None)
    wasserstein.set_defaults(handler=commands.cmd_wasserstein)

    bench = subparsers.add_parser("bench", help="Time ND against END on random tree pairs")
    bench.add_argument("--depths", type=_int_list, default=[2, 4, 6])
    bench.add_argument("--runs", type=_positive_int, default=10)
    bench.add_argument("--max-children", type=int, default=3)
    bench.add_argument("--value-dim", type=int, default=3)
    bench.add_argument("--scale", type=float, default=1.0)
    bench.add_argument("--root-scale", type=float, default=1.0)
    bench.add_argument("--r", type=_order, default=2.0)
    bench.add_argument("--gamma-divisor", type=_positive_float, default=30.0)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--tol", type=_positive_float, default=1e-9)
    bench.add_argument("--max-iter", type=_positive_int, default=1000)
    bench.add_argument("--on-max-iter", choices=["raise", "round"], default="round")
    bench.add_argument("--method", choices=["simplex", "highs"], default="highs")
    bench.add_argument("--workers", type=_positive_int, default=1)
    bench.add_argument("-o", "--output", required=True, help="Per-depth summary CSV")
    bench.add_argument("--raw", default=None, help="Per-pair CSV (default: <output>.pairs.csv)")
    bench.set_defaults(handler=commands.cmd_bench)

    plan = subparsers.add_parser("plan", help="Export regularized plans and threshold edges")
    plan.add_argument("source", help="Tree .json or point-cloud .csv")
    plan.add_argument("target", help="Tree .json or point-cloud .csv")
    plan.add_argument("--gamma", type=_float_list, required=True, help="Comma-separated gammas")
    plan.add_argument("--threshold", type=_float_list, default=[0.3, 0.2])
    plan.add_argument("--r", type=_order, default=2.0)
    plan.add_argument("-o", "--output", required=True, help="Plan CSV")
    plan.add_argument("--edges", default=None, help="Edge list CSV")
    _add_sinkhorn_options(plan)
    plan.set_defaults(handler=commands.cmd_plan)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags and 0 on --help / --version
        return int(e.code or 0)

    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except NestedOTException as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
