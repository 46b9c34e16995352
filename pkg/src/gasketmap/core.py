"""Discrete Sierpinski gasket embedded in an n x n grid.

The gasket of edge n (a power of two) is the set of cells (x, y) with
``x & (n - 1 - y) == 0``, origin at the top-left corner and y growing
downward.  Level r = log2(n) holds exactly 3**r cells, and those cells pack
into a quasi-regular rectangle of 3**floor(r/2) x 3**ceil(r/2) positions.
Everything here is exact integer arithmetic; supported levels are capped at
r = 40 so every count fits an unsigned 64-bit word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

MAX_LEVEL = 40
# Dense n*n scans get silly past this edge; callers wanting bigger gaskets
# should use the analytic formulas instead.
ORACLE_MAX_EDGE = 1 << 13


class Coord2(NamedTuple):
    """Integer (x, y) cell/block coordinate, y increasing downward."""

    x: int
    y: int


class OrthotopeDims(NamedTuple):
    """Width x height of the packed block rectangle."""

    width: int
    height: int


def _check_level(r: int) -> None:
    if not 0 <= r <= MAX_LEVEL:
        raise ValueError(f"scale level must be in [0, {MAX_LEVEL}], got {r}")


def scale_level(n: int) -> int:
    """log2(n) for a power-of-two edge length; anything else is rejected."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"edge length must be a power of two >= 1, got {n}")
    r = n.bit_length() - 1
    _check_level(r)
    return r


def volume(r: int) -> int:
    """Cell count 3**r of the level-r gasket (exact integer)."""
    _check_level(r)
    return 3**r


def hausdorff_exponent() -> float:
    """log2(3), the growth exponent tying cell count to edge length."""
    return math.log2(3.0)


def packing_dims(r: int) -> OrthotopeDims:
    """Dimensions of the packed block rectangle for a level-r gasket.

    x carries the base-3 digits of even levels and y the odd ones, so the
    rectangle is 3**floor(r/2) wide and 3**ceil(r/2) tall; width * height
    always equals volume(r).
    """
    _check_level(r)
    return OrthotopeDims(width=3 ** (r // 2), height=3 ** ((r + 1) // 2))


def is_member(t: Coord2 | tuple[int, int], n: int) -> bool:
    """Whether cell t belongs to the gasket of edge n."""
    r = scale_level(n)
    x, y = t
    if not (0 <= x < n and 0 <= y < n):
        raise ValueError(f"coordinate {t!r} outside the {n}x{n} grid")
    return (x & (n - 1 - y)) == 0


def member_mask(n: int) -> np.ndarray:
    """Boolean n x n mask of gasket cells (vectorized membership test)."""
    scale_level(n)
    if n > ORACLE_MAX_EDGE:
        raise ValueError(f"edge {n} too large for a dense scan (max {ORACLE_MAX_EDGE})")
    xs = np.arange(n, dtype=np.int64)
    ys = n - 1 - xs
    return (xs[None, :] & ys[:, None]) == 0


def enumerate_cells(n: int) -> list[Coord2]:
    """All gasket cells of an edge-n grid in row-major order (y outer).

    This is the brute-force oracle the rest of the package is validated
    against; its length always equals volume(log2(n)).
    """
    mask = member_mask(n)
    ys, xs = np.nonzero(mask)
    return [Coord2(int(x), int(y)) for x, y in zip(xs, ys)]


@dataclass(frozen=True)
class FractalSpec:
    """Problem instance: cell edge n and block edge rho, both powers of two.

    Derived fields: r = log2(n), block-grid edge n_b = n / rho and its level
    r_b = log2(n_b).  rho is the square block edge (rho x rho threads).
    """

    n: int
    rho: int = 1
    r: int = field(init=False)
    n_b: int = field(init=False)
    r_b: int = field(init=False)

    def __post_init__(self) -> None:
        r = scale_level(self.n)
        if self.rho < 1 or self.rho & (self.rho - 1):
            raise ValueError(f"block edge must be a power of two >= 1, got {self.rho}")
        if self.rho > self.n:
            raise ValueError(f"block edge {self.rho} exceeds grid edge {self.n}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "n_b", self.n // self.rho)
        object.__setattr__(self, "r_b", r - scale_level(self.rho))
