"""Launch kernels: numba-compiled hot loops with a pure-numpy fallback.

The numba path walks blocks in parallel exactly as a device would (one loop
body per block, per-thread work inside); the numpy path computes the same
writes vectorized.  Both produce bit-identical grids.  The active path is
chosen by the ``GASKETMAP_BACKEND`` environment variable: ``numba``,
``numpy``, or unset/``auto`` (numba when importable).
"""

from __future__ import annotations

import os

import numpy as np

from . import intra
from .blockmap import map_blocks_array
from .core import member_mask, packing_dims, scale_level

BACKEND_ENV = "GASKETMAP_BACKEND"

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-less hosts
    HAVE_NUMBA = False

# integer tags shared with the jitted kernels
KERNEL_CONST = 0
KERNEL_NEIGHBOR_SUM = 1
STRAT_UNROLL = 0
STRAT_TABLE = 1
STRAT_SUBBOX = 2

_EMPTY = np.empty(0, dtype=np.int64)


def resolve_backend(name: str | None = None) -> str:
    """Pick 'numba' or 'numpy' from an explicit name or the env flag."""
    name = (name or os.environ.get(BACKEND_ENV, "") or "auto").strip().lower()
    if name == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not installed")
        return name
    if name == "numpy":
        return name
    raise ValueError(f"unknown backend {name!r} (expected numba, numpy or auto)")


def set_workers(workers: int | None) -> None:
    """Clamp the numba thread pool; the numpy path ignores worker counts."""
    if workers is None or not HAVE_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# numpy fallback
# ---------------------------------------------------------------------------


def _kernel_values_np(
    kind: int, param: int, src: np.ndarray, xs: np.ndarray, ys: np.ndarray
) -> np.ndarray:
    """Kernel outputs for target cells, reading the pre-launch snapshot."""
    if kind == KERNEL_CONST:
        return np.full(xs.shape, param, dtype=np.int32)
    n = src.shape[0]
    total = np.full(xs.shape, param, dtype=np.int32)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nx = xs + dx
        ny = ys + dy
        ok = (nx >= 0) & (nx < n) & (ny >= 0) & (ny < n)
        total[ok] += src[ny[ok], nx[ok]]
    return total


def run_bounding_box_np(
    grid: np.ndarray, src: np.ndarray, rho: int, kind: int, param: int
) -> None:
    """Identity map over the full box; off-gasket threads do nothing."""
    n = grid.shape[0]
    ys, xs = np.nonzero(member_mask(n))
    grid[ys, xs] = _kernel_values_np(kind, param, src, xs, ys)


def run_block_space_np(
    grid: np.ndarray,
    src: np.ndarray,
    rho: int,
    r_b: int,
    local_x: np.ndarray,
    local_y: np.ndarray,
    kind: int,
    param: int,
) -> None:
    """Map every block, then scatter each block's local cells in one shot."""
    width, height = packing_dims(r_b)
    idx = np.arange(width * height, dtype=np.int64)
    bx, by = map_blocks_array(idx % width, idx // width, r_b)
    xs = (bx * rho)[:, None] + local_x[None, :]
    ys = (by * rho)[:, None] + local_y[None, :]
    xs = xs.ravel()
    ys = ys.ravel()
    grid[ys, xs] = _kernel_values_np(kind, param, src, xs, ys)


def local_cell_arrays(strategy: intra.IntraStrategy, rho: int) -> tuple[np.ndarray, np.ndarray]:
    """Block-local target cells as arrays, one entry per useful thread."""
    cells = intra.local_cells(strategy, rho)
    lx = np.fromiter((c.x for c in cells), dtype=np.int64, count=len(cells))
    ly = np.fromiter((c.y for c in cells), dtype=np.int64, count=len(cells))
    return lx, ly


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _cell_value(src, x, y, kind, param):
        if kind == KERNEL_CONST:
            return param
        n = src.shape[0]
        total = param
        if x > 0:
            total += src[y, x - 1]
        if x < n - 1:
            total += src[y, x + 1]
        if y > 0:
            total += src[y - 1, x]
        if y < n - 1:
            total += src[y + 1, x]
        return total

    @njit(cache=True, parallel=True)
    def _bounding_box_nb(grid, src, rho, kind, param):
        n = grid.shape[0]
        nb = n // rho
        for b in prange(nb * nb):
            by = b // nb
            bx = b - by * nb
            for ty in range(rho):
                y = by * rho + ty
                m = n - 1 - y
                for tx in range(rho):
                    x = bx * rho + tx
                    if x & m == 0:
                        grid[y, x] = _cell_value(src, x, y, kind, param)

    @njit(cache=True, parallel=True)
    def _block_space_nb(
        grid, src, rho, r_b, width, nblocks, strategy, tab_x, tab_y, r_p, t_width, kind, param
    ):
        for b in prange(nblocks):
            wy = b // width
            wx = b - wy * width
            # accumulate the r_b per-level offsets
            lx = 0
            ly = 0
            div_x = 1
            div_y = 1
            step = 1
            for mu in range(1, r_b + 1):
                if mu & 1:
                    region = (wy // div_y) % 3
                    div_y *= 3
                else:
                    region = (wx // div_x) % 3
                    div_x *= 3
                dx = region >> 1
                lx += dx * step
                ly += (region - dx) * step
                step <<= 1
            ox = lx * rho
            oy = ly * rho
            if strategy == STRAT_SUBBOX:
                for ty in range(rho):
                    m = rho - 1 - ty
                    y = oy + ty
                    for tx in range(rho):
                        if tx & m == 0:
                            x = ox + tx
                            grid[y, x] = _cell_value(src, x, y, kind, param)
            elif strategy == STRAT_TABLE:
                for i in range(tab_x.shape[0]):
                    x = ox + tab_x[i]
                    y = oy + tab_y[i]
                    grid[y, x] = _cell_value(src, x, y, kind, param)
            else:  # unroll: every thread re-runs the map at tile scale
                n_threads = 1
                for _ in range(r_p):
                    n_threads *= 3
                for t in range(n_threads):
                    ty = t // t_width
                    tx = t - ty * t_width
                    sx = 0
                    sy = 0
                    tdiv_x = 1
                    tdiv_y = 1
                    tstep = 1
                    for mu in range(1, r_p + 1):
                        if mu & 1:
                            region = (ty // tdiv_y) % 3
                            tdiv_y *= 3
                        else:
                            region = (tx // tdiv_x) % 3
                            tdiv_x *= 3
                        dx = region >> 1
                        sx += dx * tstep
                        sy += (region - dx) * tstep
                        tstep <<= 1
                    x = ox + sx
                    y = oy + sy
                    grid[y, x] = _cell_value(src, x, y, kind, param)


def run_bounding_box(
    grid: np.ndarray, src: np.ndarray, rho: int, kind: int, param: int, backend: str
) -> None:
    if backend == "numba":
        _bounding_box_nb(grid, src, rho, kind, np.int32(param))
    else:
        run_bounding_box_np(grid, src, rho, kind, param)


def run_block_space(
    grid: np.ndarray,
    src: np.ndarray,
    rho: int,
    r_b: int,
    strategy: intra.IntraStrategy,
    local_x: np.ndarray,
    local_y: np.ndarray,
    kind: int,
    param: int,
    backend: str,
) -> None:
    if backend == "numba":
        width, _ = packing_dims(r_b)
        r_p = scale_level(rho)
        t_width, _ = packing_dims(r_p)
        strat = {
            intra.IntraStrategy.UNROLL: STRAT_UNROLL,
            intra.IntraStrategy.TABLE: STRAT_TABLE,
            intra.IntraStrategy.SUBBOX: STRAT_SUBBOX,
        }[strategy]
        tab_x, tab_y = (local_x, local_y) if strat == STRAT_TABLE else (_EMPTY, _EMPTY)
        _block_space_nb(
            grid,
            src,
            rho,
            r_b,
            width,
            3**r_b,
            strat,
            tab_x,
            tab_y,
            r_p,
            t_width,
            kind,
            np.int32(param),
        )
    else:
        run_block_space_np(grid, src, rho, r_b, local_x, local_y, kind, param)
