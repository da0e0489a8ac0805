"""
Benchmark service
Times ND against END on random tree pairs and aggregates speedup and relative error per depth
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd

from nestedot.core.exceptions import NestedOTException
from nestedot.models.tree import ScenarioTree
from nestedot.schemas.bench import (
    BENCH_COLUMNS,
    PAIR_COLUMNS,
    BenchConfig,
    BenchPairRow,
    BenchRow,
)
from nestedot.schemas.solver import GenSpec
from nestedot.services import tree_service
from nestedot.services.nested import entropic_nested_distance, nested_distance
from nestedot.utils.io import read_csv, write_csv

logger = logging.getLogger(__name__)


def pair_seeds(seed: int, depth: int, run: int) -> Tuple[int, int]:
    """Independent generator seeds for the two trees of one run"""
    seed_x, seed_y = (
        int(np.random.SeedSequence([seed, depth, run, side]).generate_state(1)[0])
        for side in (0, 1)
    )
    return seed_x, seed_y


def make_pair(config: BenchConfig, depth: int, run: int) -> Tuple[ScenarioTree, ScenarioTree]:
    """The tree pair measured for (depth, run)"""
    X, Y = (
        tree_service.generate(
            GenSpec(
                depth=depth,
                max_children=config.max_children,
                value_dim=config.value_dim,
                seed=seed,
                increment_scale=config.increment_scale,
                root_scale=config.root_scale,
            )
        )
        for seed in pair_seeds(config.seed, depth, run)
    )
    return X, Y


def _measure_pair(config: BenchConfig, depth: int, run: int) -> BenchPairRow:
    """Generate one pair and time both recursions; failures become data"""
    seed_x, seed_y = pair_seeds(config.seed, depth, run)
    row = {"depth": depth, "run": run, "seed_x": seed_x, "seed_y": seed_y}

    try:
        X, Y = make_pair(config, depth, run)

        start = time.perf_counter()
        nd = nested_distance(X, Y, config.r, method=config.exact_method, workers=1)
        time_nd = time.perf_counter() - start

        start = time.perf_counter()
        end = entropic_nested_distance(
            X,
            Y,
            config.r,
            gamma_divisor=config.gamma_divisor,
            tol=config.tol,
            max_iter=config.max_iter,
            log_domain=True,
            on_max_iter=config.on_max_iter,
        )
        time_end = time.perf_counter() - start
    except (NestedOTException, ValueError, FloatingPointError) as e:
        logger.warning(f"Benchmark pair depth={depth} run={run} failed: {e}")
        return BenchPairRow(**row, status="failed", error=str(e))

    # END >= ND; forced subproblems can leave a few ulps of negative noise
    relative = 0.0 if end.value <= 0 else max(0.0, (end.value - nd.value) / end.value * 100.0)
    return BenchPairRow(
        **row,
        nd=nd.value,
        end=end.value,
        time_nd_ms=time_nd * 1e3,
        time_end_ms=time_end * 1e3,
        relative_error_pct=relative,
        subproblems=nd.subproblem_count,
        rounded_subproblems=end.rounded_count,
    )


def aggregate(pairs: List[BenchPairRow]) -> List[BenchRow]:
    """Per-depth means over the successful pairs"""
    frame = pd.DataFrame([pair.model_dump() for pair in pairs], columns=PAIR_COLUMNS)
    ok = frame[frame["status"] == "ok"]

    rows = []
    for depth in sorted(frame["depth"].unique()):
        group = ok[ok["depth"] == depth]
        if group.empty:
            logger.warning(f"Depth {depth}: every pair failed, no summary row")
            continue
        mean_nd = float(group["time_nd_ms"].mean())
        mean_end = float(group["time_end_ms"].mean())
        rows.append(
            BenchRow(
                depth=int(depth),
                mean_time_nd_ms=mean_nd,
                mean_time_end_ms=mean_end,
                speedup=mean_nd / mean_end if mean_end > 0 else math.inf,
                relative_error_pct=float(group["relative_error_pct"].mean()),
            )
        )
    return rows


class BenchmarkService:
    """Runs the ND vs END timing protocol described by a BenchConfig"""

    def __init__(self, config: BenchConfig):
        self.config = config

    def make_pair(self, depth: int, run: int) -> Tuple[ScenarioTree, ScenarioTree]:
        return make_pair(self.config, depth, run)

    def _warm_up(self, depth: int) -> None:
        # Untimed pass on an extra pair so first-call costs do not land in run 0
        _measure_pair(self.config, depth, self.config.runs)

    def run_pairs(self) -> List[BenchPairRow]:
        config = self.config
        pairs: List[BenchPairRow] = []

        for depth in config.depths:
            self._warm_up(depth)
            runs = range(config.runs)

            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    measured = list(
                        pool.map(_measure_pair, [config] * config.runs, [depth] * config.runs, runs)
                    )
            else:
                measured = [_measure_pair(config, depth, run) for run in runs]

            failed = sum(1 for row in measured if row.status != "ok")
            logger.info(
                f"Depth {depth}: {len(measured) - failed}/{len(measured)} pairs measured"
            )
            pairs.extend(measured)

        return pairs

    def run(self) -> Tuple[List[BenchRow], List[BenchPairRow]]:
        """Measure every depth, then write the summary and raw CSVs if configured"""
        pairs = self.run_pairs()
        rows = aggregate(pairs)

        if self.config.output is not None:
            write_csv((row.model_dump() for row in rows), BENCH_COLUMNS, self.config.output)
        if self.config.raw_output is not None:
            write_csv((pair.model_dump() for pair in pairs), PAIR_COLUMNS, self.config.raw_output)

        for row in rows:
            logger.info(
                f"depth={row.depth} nd={row.mean_time_nd_ms:.2f}ms end={row.mean_time_end_ms:.2f}ms "
                f"speedup={row.speedup:.2f} rel_err={row.relative_error_pct:.3f}%"
            )
        return rows, pairs


def _records(frame: pd.DataFrame) -> List[dict]:
    """Rows as plain dicts with empty cells dropped"""
    return [
        {
            key: value
            for key, value in record.items()
            if not (value is None or (isinstance(value, float) and math.isnan(value)))
        }
        for record in frame.to_dict("records")
    ]


def load_bench_rows(path: Path) -> List[BenchRow]:
    """Re-parse a summary CSV written by the bench command"""
    return [BenchRow(**record) for record in _records(read_csv(path, BENCH_COLUMNS))]


def load_pair_rows(path: Path) -> List[BenchPairRow]:
    """Re-parse a raw per-pair CSV written by the bench command"""
    return [BenchPairRow(**record) for record in _records(read_csv(path, PAIR_COLUMNS))]
