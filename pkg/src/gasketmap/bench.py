"""Benchmark sweeps over (scale level, block edge, mapping, strategy).

Each combination becomes one CSV row carrying the exact work counters, the
simulated cost, and wall-clock statistics gathered as a mean of sub-averages
(100 sub-averages of 10 runs by default).  Rows that would not fit the
memory budget, or whose block edge exceeds the grid, are emitted with a
skip status instead of being dropped.
"""

from __future__ import annotations

import math
import os
import statistics
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import FractalSpec
from .engine import LaunchConfig, LaunchPlan, Mapping, make_grid, prepare, work_counts
from .intra import IntraStrategy

CSV_HEADER = (
    "mapping,strategy,r,n,rho,blocks_launched,threads_launched,threads_useful,"
    "map_ops,reduction_depth,simulated_cost,wall_ns_mean,wall_ns_stderr,"
    "cost_ratio,speedup,status"
)

DEFAULT_RHO_SET = (1, 2, 4, 8, 16, 32)
DEFAULT_MEM_LIMIT = 256 * 1024 * 1024  # grid bytes; keeps the default sweep at r <= 13


@dataclass
class SweepConfig:
    r_min: int = 0
    r_max: int = 16
    rho_set: Sequence[int] = DEFAULT_RHO_SET
    mappings: Sequence[Mapping] = (Mapping.BOUNDING_BOX, Mapping.BLOCK_SPACE)
    strategies: Sequence[IntraStrategy] = tuple(IntraStrategy)
    reps: tuple[int, int] = (100, 10)
    out: Path = Path("bench.csv")
    workers: Optional[int] = None
    backend: Optional[str] = None
    mem_limit_bytes: int = DEFAULT_MEM_LIMIT


@dataclass
class BenchRecord:
    mapping: str
    strategy: str
    r: int
    n: int
    rho: int
    blocks_launched: int = 0
    threads_launched: int = 0
    threads_useful: int = 0
    map_ops: int = 0
    reduction_depth: int = 0
    simulated_cost: int = 0
    wall_ns_mean: Optional[float] = None
    wall_ns_stderr: Optional[float] = None
    cost_ratio: Optional[float] = None
    speedup: Optional[float] = None
    status: str = "ok"


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".6g")


def record_to_row(rec: BenchRecord) -> str:
    return ",".join(
        [
            rec.mapping,
            rec.strategy,
            str(rec.r),
            str(rec.n),
            str(rec.rho),
            str(rec.blocks_launched),
            str(rec.threads_launched),
            str(rec.threads_useful),
            str(rec.map_ops),
            str(rec.reduction_depth),
            str(rec.simulated_cost),
            _fmt(rec.wall_ns_mean),
            _fmt(rec.wall_ns_stderr),
            _fmt(rec.cost_ratio),
            _fmt(rec.speedup),
            rec.status,
        ]
    )


def write_csv(records: Sequence[BenchRecord], path: Path | str) -> None:
    """Write the CSV atomically: full temp file, then rename into place."""
    path = Path(path)
    lines = [CSV_HEADER] + [record_to_row(r) for r in records]
    payload = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def read_csv(path: Path | str) -> list[BenchRecord]:
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln]
    if lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header: {lines[0]!r}")
    out = []
    for ln in lines[1:]:
        f = ln.split(",")
        out.append(
            BenchRecord(
                mapping=f[0],
                strategy=f[1],
                r=int(f[2]),
                n=int(f[3]),
                rho=int(f[4]),
                blocks_launched=int(f[5]),
                threads_launched=int(f[6]),
                threads_useful=int(f[7]),
                map_ops=int(f[8]),
                reduction_depth=int(f[9]),
                simulated_cost=int(f[10]),
                wall_ns_mean=float(f[11]) if f[11] else None,
                wall_ns_stderr=float(f[12]) if f[12] else None,
                cost_ratio=float(f[13]) if f[13] else None,
                speedup=float(f[14]) if f[14] else None,
                status=f[15],
            )
        )
    return out


def _time_plan(plan: LaunchPlan, grid, reps: tuple[int, int]) -> tuple[float, float]:
    """Mean and standard error over `outer` sub-averages of `inner` runs."""
    outer, inner = reps
    plan.run(grid, grid)  # warm up (JIT compile on the numba path)
    subs = []
    for _ in range(outer):
        t0 = time.perf_counter_ns()
        for _ in range(inner):
            plan.run(grid, grid)
        subs.append((time.perf_counter_ns() - t0) / inner)
    mean = statistics.fmean(subs)
    stderr = statistics.stdev(subs) / math.sqrt(outer) if outer > 1 else 0.0
    return mean, stderr


def _combos(cfg: SweepConfig) -> list[tuple[Mapping, Optional[IntraStrategy]]]:
    combos: list[tuple[Mapping, Optional[IntraStrategy]]] = []
    if Mapping.BOUNDING_BOX in cfg.mappings:
        combos.append((Mapping.BOUNDING_BOX, None))
    if Mapping.BLOCK_SPACE in cfg.mappings:
        combos.extend((Mapping.BLOCK_SPACE, s) for s in cfg.strategies)
    return combos


def run_sweep(cfg: SweepConfig) -> list[BenchRecord]:
    """Execute the sweep and return one record per combination, in order."""
    from . import backends

    backends.set_workers(cfg.workers)
    records: list[BenchRecord] = []
    combos = _combos(cfg)
    for r in range(cfg.r_min, cfg.r_max + 1):
        n = 1 << r
        for rho in cfg.rho_set:
            skip = None
            if rho > n:
                skip = "skipped-shape"
            elif n * n * 4 > cfg.mem_limit_bytes:
                skip = "skipped-mem"
            if skip:
                for mapping, strat in combos:
                    records.append(
                        BenchRecord(
                            mapping=mapping.value,
                            strategy=strat.value if strat else "none",
                            r=r,
                            n=n,
                            rho=rho,
                            status=skip,
                        )
                    )
                continue

            spec = FractalSpec(n=n, rho=rho)
            grid = make_grid(n)
            bb_cost = work_counts(spec, Mapping.BOUNDING_BOX).simulated_cost
            bb_mean: Optional[float] = None
            for mapping, strat in combos:
                config = LaunchConfig(spec=spec, mapping=mapping, strategy=strat)
                counts = work_counts(spec, mapping, strat)
                plan = prepare(config, cfg.backend)
                mean, stderr = _time_plan(plan, grid, cfg.reps)
                if mapping is Mapping.BOUNDING_BOX:
                    bb_mean = mean
                    cost_ratio = None
                    speedup = None
                else:
                    cost_ratio = bb_cost / counts.simulated_cost
                    speedup = bb_mean / mean if bb_mean else None
                records.append(
                    BenchRecord(
                        mapping=mapping.value,
                        strategy=strat.value if strat else "none",
                        r=r,
                        n=n,
                        rho=rho,
                        blocks_launched=counts.blocks_launched,
                        threads_launched=counts.threads_launched,
                        threads_useful=counts.threads_useful,
                        map_ops=counts.map_ops,
                        reduction_depth=counts.reduction_depth,
                        simulated_cost=counts.simulated_cost,
                        wall_ns_mean=mean,
                        wall_ns_stderr=stderr,
                        cost_ratio=cost_ratio,
                        speedup=speedup,
                        status="ok",
                    )
                )
            del grid
    return records
