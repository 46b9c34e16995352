"""Placement of a mapped block's threads onto the gasket cells of its tile.

Three interchangeable strategies, trading map arithmetic, shared memory and
extra threads against each other:

* ``UNROLL``  - each of 3**log2(rho) threads re-runs the block map at the
  tile's own scale;
* ``TABLE``   - threads read precomputed local offsets from a shared table;
* ``SUBBOX``  - a full rho x rho box of threads applies the membership test
  locally and the misses are discarded.

All three cover exactly the edge-rho gasket cell set; only thread counts and
per-thread cost differ.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .blockmap import map_block
from .core import Coord2, enumerate_cells, packing_dims, scale_level, volume

MAX_TABLE_EDGE = 1 << 10


class IntraStrategy(enum.Enum):
    UNROLL = "unroll"
    TABLE = "table"
    SUBBOX = "subbox"


@dataclass(frozen=True)
class LookupTable:
    """Shared block-local offsets; one entry per useful thread."""

    entries: tuple[Coord2, ...]
    rho: int


def unroll_thread_map(t: tuple[int, int], rho: int) -> Coord2:
    """Block map re-applied at tile scale: thread t to its local gasket cell.

    Threads are arranged as the packed rectangle of level log2(rho), so a
    tile of edge rho runs exactly 3**log2(rho) threads.
    """
    return map_block(t, scale_level(rho)).coord


def build_lookup_table(rho: int) -> LookupTable:
    """Local cells of an edge-rho tile in row-major order, one per thread."""
    scale_level(rho)
    if rho > MAX_TABLE_EDGE:
        raise ValueError(f"lookup table capped at edge {MAX_TABLE_EDGE}, got {rho}")
    return LookupTable(entries=tuple(enumerate_cells(rho)), rho=rho)


def subbox_thread_map(t: tuple[int, int], rho: int) -> Optional[Coord2]:
    """Identity map with a local membership test; None means discard."""
    x, y = t
    if not (0 <= x < rho and 0 <= y < rho):
        raise ValueError(f"thread {t!r} outside the {rho}x{rho} box")
    if x & (rho - 1 - y):
        return None
    return Coord2(x, y)


def threads_per_block(strategy: IntraStrategy, rho: int) -> int:
    """Threads a block allocates under the given strategy."""
    if strategy is IntraStrategy.SUBBOX:
        return rho * rho
    return volume(scale_level(rho))


def local_cells(strategy: IntraStrategy, rho: int) -> list[Coord2]:
    """Block-local cell set a strategy produces, sorted row-major."""
    r_p = scale_level(rho)
    if strategy is IntraStrategy.TABLE:
        return list(build_lookup_table(rho).entries)
    if strategy is IntraStrategy.SUBBOX:
        cells = [
            Coord2(x, y)
            for y in range(rho)
            for x in range(rho)
            if subbox_thread_map((x, y), rho) is not None
        ]
        return cells
    width, height = packing_dims(r_p)
    cells = [unroll_thread_map((tx, ty), rho) for ty in range(height) for tx in range(width)]
    return sorted(cells, key=lambda c: (c.y, c.x))
