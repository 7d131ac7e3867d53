"""Patch-major tiling of feature maps and its inverse.

A feature map is zero-padded to a multiple of the block size B on each axis
and split into B x B tiles.  In the flattened patch-major order each tile is
contiguous (tile interior row-major) and tiles are ordered row-major, so the
flattened index of padded pixel (y, x) is

    tile_index * B^2 + (y mod B) * B + (x mod B),
    tile_index = (y div B) * (padded_width / B) + (x div B).

Padded cells carry the zero feature vector, so their correlations vanish —
consistent with the zero-padding sampling convention.  Only square tiles are
supported, with the same B used for source and target and across all pyramid
levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FeatureMap


def padded_extent(size: int, block: int) -> int:
    """Smallest multiple of block >= size."""
    return block * ((size + block - 1) // block)


@dataclass
class PatchMajorFeatures:
    """Feature map in flattened patch-major order.

    values: [padded_height * padded_width, D] float32, indexed by pm_index.
    """

    block: int
    padded_height: int
    padded_width: int
    orig_height: int
    orig_width: int
    dims: int
    values: np.ndarray

    @property
    def tiles_y(self) -> int:
        return self.padded_height // self.block

    @property
    def tiles_x(self) -> int:
        return self.padded_width // self.block

    @property
    def n_tiles(self) -> int:
        return self.tiles_y * self.tiles_x

    def tiles(self) -> np.ndarray:
        """[n_tiles, B^2, D] view: one contiguous row range per tile."""
        b2 = self.block * self.block
        return self.values.reshape(self.n_tiles, b2, self.dims)


def pm_index(y: int, x: int, block: int, padded_width: int, padded_height: int | None = None) -> int:
    """Flattened patch-major index of padded coordinate (y, x).

    padded_width must be a multiple of block.  padded_height, when given,
    enables the upper bound check on y.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    if padded_width % block != 0:
        raise ValueError(f"padded_width {padded_width} is not a multiple of block {block}")
    if x < 0 or x >= padded_width or y < 0:
        raise ValueError(f"coordinate ({y}, {x}) outside padded grid")
    if padded_height is not None and y >= padded_height:
        raise ValueError(f"coordinate ({y}, {x}) outside padded grid")
    tiles_x = padded_width // block
    tile_index = (y // block) * tiles_x + (x // block)
    return tile_index * block * block + (y % block) * block + (x % block)


def to_patch_major(f: FeatureMap, block: int) -> PatchMajorFeatures:
    """Tile a feature map into patch-major order, zero-padding to multiples of B."""
    if block < 1:
        raise ValueError("block must be >= 1")
    ph = padded_extent(f.height, block)
    pw = padded_extent(f.width, block)
    padded = np.zeros((ph, pw, f.dims), dtype=np.float32)
    padded[: f.height, : f.width] = f.values
    flat = (
        padded.reshape(ph // block, block, pw // block, block, f.dims)
        .transpose(0, 2, 1, 3, 4)
        .reshape(ph * pw, f.dims)
    )
    return PatchMajorFeatures(
        block=block,
        padded_height=ph,
        padded_width=pw,
        orig_height=f.height,
        orig_width=f.width,
        dims=f.dims,
        values=np.ascontiguousarray(flat),
    )


def from_patch_major(p: PatchMajorFeatures) -> FeatureMap:
    """Exact inverse of to_patch_major, restricted to the original extent."""
    b = p.block
    grid = (
        p.values.reshape(p.tiles_y, p.tiles_x, b, b, p.dims)
        .transpose(0, 2, 1, 3, 4)
        .reshape(p.padded_height, p.padded_width, p.dims)
    )
    return FeatureMap(values=grid[: p.orig_height, : p.orig_width].copy())
