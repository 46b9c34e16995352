"""Deterministic launch engine over the embedded gasket.

Executes a per-cell kernel under either mapping (bounding box or block
space) and any intra-block strategy, filling an n x n grid and returning
exact work counters plus a simulated integer cost.  Kernels must write only
their mapped cell; because the block map is a bijection the writes are
disjoint, so the engine is deterministic regardless of worker count.
Neighbor reads see the pre-launch snapshot (double buffered).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import backends, intra
from .blockmap import MapResult, map_block, map_blocks_array, reduction_depth
from .core import Coord2, FractalSpec, member_mask, packing_dims, volume


class Mapping(enum.Enum):
    BOUNDING_BOX = "bb"
    BLOCK_SPACE = "blockspace"


class KernelKind(enum.Enum):
    CONST = "const"
    NEIGHBOR_SUM = "neighbor-sum"


@dataclass(frozen=True)
class CellKernel:
    """Per-cell operation: write `param`, or `param` plus the 4-neighbor sum
    read from the pre-launch snapshot (out-of-grid neighbors read as 0)."""

    kind: KernelKind = KernelKind.CONST
    param: int = 1


@dataclass(frozen=True)
class LaunchConfig:
    spec: FractalSpec
    mapping: Mapping
    strategy: Optional[intra.IntraStrategy] = None
    kernel: CellKernel = CellKernel()
    verify_coverage: bool = False

    def __post_init__(self) -> None:
        if self.mapping is Mapping.BLOCK_SPACE and self.strategy is None:
            raise ValueError("block-space launches need an intra-block strategy")


@dataclass
class WorkMetrics:
    blocks_launched: int
    threads_launched: int
    threads_useful: int
    map_ops: int
    reduction_depth: int
    simulated_cost: int
    wall_ns: float = 0.0


@dataclass
class CoverageReport:
    """Per-cell write counters plus the cells that break exact coverage."""

    counts: np.ndarray
    duplicates: list[Coord2]
    misses: list[Coord2]

    @property
    def exact(self) -> bool:
        return not self.duplicates and not self.misses


class CoverageError(RuntimeError):
    def __init__(self, report: CoverageReport):
        dups, miss = len(report.duplicates), len(report.misses)
        super().__init__(f"coverage violated: {dups} over-written, {miss} missed")
        self.report = report


def make_grid(n: int) -> np.ndarray:
    """Zeroed n x n grid of 32-bit cells."""
    return np.zeros((n, n), dtype=np.int32)


def _strategy_block_ops(strategy: intra.IntraStrategy, rho: int) -> int:
    """Intra-block map operations one block performs, summed over threads.

    With a single thread per block (rho = 1) every strategy degenerates to
    the identity and does no intra-block work at all.
    """
    if rho == 1:
        return 0
    r_p = rho.bit_length() - 1
    if strategy is intra.IntraStrategy.UNROLL:
        return volume(r_p) * r_p  # each thread re-sums r_p offset terms
    if strategy is intra.IntraStrategy.TABLE:
        return volume(r_p)  # one shared-table read per thread
    return rho * rho  # one membership test per boxed thread


def work_counts(
    spec: FractalSpec, mapping: Mapping, strategy: Optional[intra.IntraStrategy] = None
) -> WorkMetrics:
    """Exact launch-shape counters; the cost model, independent of wall time.

    map_ops counts one unit per per-level offset evaluation and one per
    membership test; simulated_cost adds one kernel op per useful thread.
    """
    useful = volume(spec.r)
    if mapping is Mapping.BOUNDING_BOX:
        blocks = spec.n_b * spec.n_b
        threads = blocks * spec.rho * spec.rho
        map_ops = threads  # every thread runs the global membership test
        depth = 0
    else:
        if strategy is None:
            raise ValueError("block-space launches need an intra-block strategy")
        blocks = volume(spec.r_b)
        threads = blocks * intra.threads_per_block(strategy, spec.rho)
        map_ops = blocks * (spec.r_b + _strategy_block_ops(strategy, spec.rho))
        depth = reduction_depth(spec.r_b)
    return WorkMetrics(
        blocks_launched=blocks,
        threads_launched=threads,
        threads_useful=useful,
        map_ops=map_ops,
        reduction_depth=depth,
        simulated_cost=map_ops + useful,
    )


def simulated_cost(
    spec: FractalSpec, mapping: Mapping, strategy: Optional[intra.IntraStrategy] = None
) -> int:
    return work_counts(spec, mapping, strategy).simulated_cost


@dataclass
class LaunchPlan:
    """One configuration bound to a backend, ready to run repeatedly.

    The lookup arrays are built once per configuration (shared-table
    semantics); the block map itself is recomputed on every run.
    """

    config: LaunchConfig
    backend: str
    local_x: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    local_y: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def run(self, grid: np.ndarray, src: np.ndarray) -> None:
        cfg = self.config
        kind = backends.KERNEL_CONST
        if cfg.kernel.kind is KernelKind.NEIGHBOR_SUM:
            kind = backends.KERNEL_NEIGHBOR_SUM
        if cfg.mapping is Mapping.BOUNDING_BOX:
            backends.run_bounding_box(grid, src, cfg.spec.rho, kind, cfg.kernel.param, self.backend)
        else:
            backends.run_block_space(
                grid,
                src,
                cfg.spec.rho,
                cfg.spec.r_b,
                cfg.strategy,
                self.local_x,
                self.local_y,
                kind,
                cfg.kernel.param,
                self.backend,
            )


def prepare(config: LaunchConfig, backend: Optional[str] = None) -> LaunchPlan:
    resolved = backends.resolve_backend(backend)
    plan = LaunchPlan(config, resolved)
    if config.mapping is Mapping.BLOCK_SPACE:
        need_locals = resolved == "numpy" or config.strategy is intra.IntraStrategy.TABLE
        if need_locals:
            plan.local_x, plan.local_y = backends.local_cell_arrays(
                config.strategy, config.spec.rho
            )
    return plan


def launch(
    config: LaunchConfig, grid: np.ndarray, backend: Optional[str] = None
) -> WorkMetrics:
    """Run one launch, mutating `grid`, and return the work counters."""
    n = config.spec.n
    if grid.shape != (n, n) or grid.dtype != np.int32:
        raise ValueError(f"grid must be int32 of shape ({n}, {n}), got {grid.dtype} {grid.shape}")
    plan = prepare(config, backend)
    src = grid.copy() if config.kernel.kind is KernelKind.NEIGHBOR_SUM else grid
    t0 = time.perf_counter_ns()
    plan.run(grid, src)
    wall = time.perf_counter_ns() - t0
    metrics = work_counts(config.spec, config.mapping, config.strategy)
    metrics.wall_ns = float(wall)
    if config.verify_coverage:
        report = verify_coverage(config)
        if not report.exact:
            raise CoverageError(report)
    return metrics


def verify_coverage(
    config: LaunchConfig,
    map_fn: Optional[Callable[[tuple[int, int], int], MapResult]] = None,
) -> CoverageReport:
    """Re-run the launch shape with per-cell counters and audit coverage.

    duplicates lists cells written more often than they should be (gasket
    cells more than once, anything else at all); misses lists gasket cells
    never written.  Counting runs serially on the portable path so the
    counters are exact even for deliberately broken maps; writes falling
    outside the grid are dropped (they surface as misses).
    """
    spec = config.spec
    n = spec.n
    counts = np.zeros((n, n), dtype=np.int64)
    if config.mapping is Mapping.BOUNDING_BOX:
        counts[member_mask(n)] += 1  # identity map: one useful thread per cell
    else:
        if map_fn is None:
            width, height = packing_dims(spec.r_b)
            idx = np.arange(width * height, dtype=np.int64)
            bx, by = map_blocks_array(idx % width, idx // width, spec.r_b)
        else:
            width, height = packing_dims(spec.r_b)
            coords = [
                map_fn((wx, wy), spec.r_b).coord
                for wy in range(height)
                for wx in range(width)
            ]
            bx = np.array([c.x for c in coords], dtype=np.int64)
            by = np.array([c.y for c in coords], dtype=np.int64)
        lx, ly = backends.local_cell_arrays(config.strategy, spec.rho)
        xs = (bx * spec.rho)[:, None] + lx[None, :]
        ys = (by * spec.rho)[:, None] + ly[None, :]
        xs = xs.ravel()
        ys = ys.ravel()
        inside = (xs >= 0) & (xs < n) & (ys >= 0) & (ys < n)
        np.add.at(counts, (ys[inside], xs[inside]), 1)

    mask = member_mask(n)
    over = (counts > mask.astype(np.int64)).nonzero()
    missed = (mask & (counts == 0)).nonzero()
    duplicates = [Coord2(int(x), int(y)) for y, x in zip(*over)]
    misses = [Coord2(int(x), int(y)) for y, x in zip(*missed)]
    return CoverageReport(counts=counts, duplicates=duplicates, misses=misses)
