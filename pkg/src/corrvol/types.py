"""Core domain types, coordinate conventions, and the bilinear-sampling primitive.

Conventions used across the whole package:

* Integer coordinate (x, y) addresses the center of cell (row y, col x); there
  are no half-pixel shifts, so a tap at an in-bounds integer coordinate equals
  direct indexing, exactly.
* Out-of-bounds bilinear neighbors contribute 0 (zero padding).  This matches
  the zero feature vectors used for padded tiles in the block-sparse path, so
  all samplers agree at image borders.
* Features and correlations are stored as float32; bilinear combination is
  evaluated in float64 with a fixed association and cast back to float32.

All types are immutable after construction (their arrays are marked
read-only), so they are safe to share across concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np


class CorrvolError(Exception):
    """Base class for errors raised by this package."""


class GatherMissError(CorrvolError):
    """A proxy gather hit a block position whose id is -1 (mask bug)."""


class CacheLimitError(CorrvolError):
    """The block cache would exceed its configured hard byte limit."""


class DimensionMismatchError(CorrvolError):
    """Two fields that must share dimensions do not."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass
class FeatureMap:
    """Per-pixel D-dimensional feature grid for one image.

    values: [H, W, D] float32, row-major (y, x, d).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"FeatureMap values must be [H, W, D], got shape {v.shape}")
        if min(v.shape) < 1:
            raise ValueError(f"FeatureMap dimensions must be >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("FeatureMap values must be finite")
        self.values = _freeze(v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        """[H*W, D] row-major view."""
        return self.values.reshape(-1, self.dims)


@dataclass
class FeaturePyramid:
    """Ordered feature maps; level 0 is the input, level l is pooled l times."""

    levels: list

    def __post_init__(self):
        if not self.levels:
            raise ValueError("FeaturePyramid needs at least one level")
        d = self.levels[0].dims
        for lvl, f in enumerate(self.levels):
            if f.dims != d:
                raise ValueError(f"pyramid level {lvl} changed channel count")

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def dims(self) -> int:
        return self.levels[0].dims


@dataclass
class CentroidField:
    """Per-source-pixel continuous level-0 target coordinates for one iteration.

    coords: [H, W, 2] float64, last axis (x, y).  Coordinates may lie outside
    the target grid; out-of-bounds lookups are legal and sample zeros.
    """

    coords: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coords, dtype=np.float64)
        if c.ndim != 3 or c.shape[2] != 2:
            raise ValueError(f"CentroidField coords must be [H, W, 2], got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("CentroidField coordinates must be finite")
        self.coords = _freeze(c)

    @property
    def height(self) -> int:
        return self.coords.shape[0]

    @property
    def width(self) -> int:
        return self.coords.shape[1]

    def x_flat(self) -> np.ndarray:
        return self.coords[..., 0].reshape(-1)

    def y_flat(self) -> np.ndarray:
        return self.coords[..., 1].reshape(-1)


@dataclass(frozen=True)
class LookupSpec:
    """Lookup geometry: window radius, pyramid level count, optional 1/sqrt(D).

    The lookup window has (2r+1)^2 integer offsets per level.  ``normalize``
    divides sampled correlations by sqrt(D) (a convention some downstream flow
    estimators apply); it defaults to off, leaving plain dot products.
    """

    radius: int
    levels: int
    normalize: bool = False

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @property
    def window(self) -> int:
        return 2 * self.radius + 1

    @property
    def support(self) -> int:
        """Diameter of the bilinear support of the window: 2r+2."""
        return 2 * self.radius + 2


@dataclass
class CostMaps:
    """Sampled correlations: one (2r+1)^2 window per source pixel per level.

    values: [H, W, L, 2r+1, 2r+1] float32.  Flattened per pixel the ordering
    is level-major, then offset dy-major (-r..r), dx-minor (-r..r).
    """

    values: np.ndarray
    radius: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        k = 2 * self.radius + 1
        if v.ndim != 5 or v.shape[3] != k or v.shape[4] != k:
            raise ValueError(f"CostMaps values must be [H, W, L, {k}, {k}], got {v.shape}")
        self.values = _freeze(v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def levels(self) -> int:
        return self.values.shape[2]

    def per_pixel(self) -> np.ndarray:
        """[H*W, L*(2r+1)^2] flattened view in the canonical ordering."""
        return self.values.reshape(self.height * self.width, -1)


@dataclass
class FlowField:
    """Per-pixel 2D displacement in pixels of its own grid.

    vectors: [H, W, 2] float32, last axis (u horizontal, v vertical).
    """

    vectors: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError(f"FlowField vectors must be [H, W, 2], got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("FlowField values must be finite")
        self.vectors = _freeze(v)

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


@dataclass
class AccessLog:
    """Deduplicated (source cell, target cell) pairs touched at one level.

    entries: sorted unique int64 codes src_linear * (tH*tW) + tgt_linear,
    covering every bilinear tap corner with nonzero weight across all
    recorded iterations.
    """

    level: int
    src_shape: Tuple[int, int]
    tgt_shape: Tuple[int, int]
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.int64)
        tgt_cells = self.tgt_shape[0] * self.tgt_shape[1]
        src_cells = self.src_shape[0] * self.src_shape[1]
        if e.size and (e.min() < 0 or e.max() >= src_cells * tgt_cells):
            raise ValueError("AccessLog entries out of level bounds")
        self.entries = _freeze(np.unique(e))

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """(source linear indices, target linear indices) arrays."""
        tgt_cells = self.tgt_shape[0] * self.tgt_shape[1]
        return self.entries // tgt_cells, self.entries % tgt_cells


@dataclass
class WorkCounter:
    """Hardware-independent work tally shared by the samplers.

    dot_products counts length-D dot products actually executed; macs is the
    matching multiply-add count; blocks_computed counts B^2 x B^2 correlation
    blocks materialized by the block-sparse path.
    """

    dot_products: int = 0
    macs: int = 0
    blocks_computed: int = 0

    def add_dots(self, count: int, dims: int) -> None:
        self.dot_products += int(count)
        self.macs += int(count) * int(dims)


def bilinear_tap(grid: np.ndarray, x: float, y: float) -> float:
    """Zero-padded bilinear sample of a 2D grid at continuous (x, y).

    Sums the <=4 integer neighbors (floor/ceil of x and y) weighted
    bilinearly; neighbors outside the grid contribute 0.  At an in-bounds
    integer coordinate this returns the exact cell value.  The combination is
    evaluated in float64 with the fixed association
    ((v00*w00 + v01*w01) + v10*w10) + v11*w11, which every sampler in this
    package mirrors.
    """
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("bilinear_tap coordinates must be finite")
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("bilinear_tap expects a 2D grid")
    h, w = grid.shape
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = float(x) - x0
    fy = float(y) - y0
    wx0, wx1 = 1.0 - fx, fx
    wy0, wy1 = 1.0 - fy, fy

    def cell(yy: int, xx: int) -> float:
        if 0 <= yy < h and 0 <= xx < w:
            return float(grid[yy, xx])
        return 0.0

    v00 = cell(y0, x0)
    v01 = cell(y0, x0 + 1)
    v10 = cell(y0 + 1, x0)
    v11 = cell(y0 + 1, x0 + 1)
    return ((v00 * (wy0 * wx0) + v01 * (wy0 * wx1)) + v10 * (wy1 * wx0)) + v11 * (wy1 * wx1)
