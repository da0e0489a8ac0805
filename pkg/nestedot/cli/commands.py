"""Command handlers; each returns the process exit code"""

import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from nestedot.core.config import settings
from nestedot.core.exceptions import UsageException
from nestedot.models.transport import NDResult
from nestedot.schemas.bench import BenchConfig
from nestedot.schemas.solver import GenSpec
from nestedot.services import plan_export, tree_service
from nestedot.services.benchmark import BenchmarkService
from nestedot.services.nested import (
    entropic_nested_distance,
    nested_distance,
    wasserstein_paths,
)
from nestedot.utils.io import read_tree, write_csv, write_json, write_tree

logger = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    return format(value, settings.FLOAT_FORMAT)


def _summary_line(tree) -> str:
    summary = tree_service.tree_summary(tree)
    stages = ",".join(str(size) for size in summary["stage_sizes"])
    return (
        f"nodes={summary['nodes']} leaves={summary['leaves']} "
        f"depth={summary['depth']} stage_sizes={stages}"
    )


def _model(factory, **fields):
    """Build a pydantic config, turning field errors into usage errors"""
    try:
        return factory(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise UsageException(f"invalid {field}: {first['msg']}") from e


def cmd_gen(args: argparse.Namespace) -> int:
    spec = _model(
        GenSpec,
        depth=args.depth,
        max_children=args.max_children,
        value_dim=args.value_dim,
        seed=args.seed,
        increment_scale=args.scale,
        root_scale=args.root_scale,
    )
    tree = tree_service.generate(spec)
    write_tree(tree, args.output)
    print(_summary_line(tree))
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    tree = read_tree(args.tree)
    print(f"valid {_summary_line(tree)}")
    return 0


def cmd_gen_pair(args: argparse.Namespace) -> int:
    if not args.epsilon >= 0:
        raise UsageException("--epsilon must be nonnegative")
    informed, uninformed = tree_service.information_gap_pair(args.amplitude, args.epsilon)
    write_tree(informed, args.left)
    write_tree(uninformed, args.right)
    print(f"{args.left}: {_summary_line(informed)}")
    print(f"{args.right}: {_summary_line(uninformed)}")
    return 0


def _report(result: NDResult) -> dict:
    return {
        "value": result.value,
        "entropic": result.entropic,
        "subproblem_count": result.subproblem_count,
        "max_subproblem_shape": list(result.max_subproblem_shape),
        "rounded_subproblems": result.rounded_count,
        "wall_time_ms": result.wall_time * 1e3,
        "metadata": result.metadata,
        "top_plan": result.top_plan.entries.tolist(),
        "stage_costs": result.stage_costs.to_dict(),
    }


def cmd_nd(args: argparse.Namespace) -> int:
    X = read_tree(args.x)
    Y = read_tree(args.y)

    if args.entropic:
        result = entropic_nested_distance(
            X,
            Y,
            args.r,
            gamma_divisor=args.gamma_divisor,
            tol=args.tol,
            max_iter=args.max_iter,
            log_domain=not args.plain,
            on_max_iter=args.on_max_iter,
        )
    else:
        result = nested_distance(X, Y, args.r, method=args.method, workers=args.workers)

    print(_fmt(result.value))
    if args.report:
        write_json(_report(result), args.report)
        logger.info(f"Report written to {args.report}")
    return 0


def cmd_wasserstein(args: argparse.Namespace) -> int:
    value = wasserstein_paths(read_tree(args.x), read_tree(args.y), args.r, method=args.method)
    print(_fmt(value))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    output = Path(args.output)
    raw_output = Path(args.raw) if args.raw else output.with_name(f"{output.stem}.pairs.csv")
    config = _model(
        BenchConfig,
        depths=args.depths,
        runs=args.runs,
        max_children=args.max_children,
        value_dim=args.value_dim,
        increment_scale=args.scale,
        root_scale=args.root_scale,
        r=args.r,
        gamma_divisor=args.gamma_divisor,
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        on_max_iter=args.on_max_iter,
        exact_method=args.method,
        workers=args.workers,
        output=output,
        raw_output=raw_output,
    )

    rows, pairs = BenchmarkService(config).run()
    for row in rows:
        print(
            f"depth={row.depth} nd_ms={row.mean_time_nd_ms:.3f} end_ms={row.mean_time_end_ms:.3f} "
            f"speedup={row.speedup:.3f} relative_error_pct={row.relative_error_pct:.4f}"
        )
    failed = sum(1 for pair in pairs if pair.status != "ok")
    if failed:
        print(f"{failed} of {len(pairs)} pairs failed; see {raw_output}")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    kinds = {Path(args.source).suffix.lower(), Path(args.target).suffix.lower()}
    if kinds == {".json"}:
        p, q, cost, sources, targets = plan_export.tree_problem(
            read_tree(args.source), read_tree(args.target), args.r
        )
    elif kinds == {".csv"}:
        xs, p = plan_export.load_point_cloud(args.source)
        ys, q = plan_export.load_point_cloud(args.target)
        cost = plan_export.point_cost(xs, ys, args.r)
        sources, targets = None, None
    else:
        raise UsageException("inputs must be two tree .json files or two point-cloud .csv files")

    plan_rows, edge_rows = plan_export.export_plans(
        p,
        q,
        cost,
        args.gamma,
        args.threshold,
        sources=sources,
        targets=targets,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    write_csv(plan_rows, plan_export.PLAN_COLUMNS, args.output)
    if args.edges:
        write_csv(edge_rows, plan_export.EDGE_COLUMNS, args.edges)

    for gamma in args.gamma:
        counts = ", ".join(
            f"theta={theta:g}: {sum(1 for e in edge_rows if e['gamma'] == gamma and e['threshold'] == theta)}"
            for theta in args.threshold
        )
        print(f"gamma={gamma:g} edges {counts}")
    return 0
