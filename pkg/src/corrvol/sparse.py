"""Block-sparse incremental sampler.

Pipeline per iteration and pyramid level:

1. scatter a computation mask over (source tile, target tile) block positions
   covering offsets -r..r+1 around the floor of each per-level centroid (the
   +1 extends radius-r windows by their bilinear support);
2. subtract everything already cached, assign new block ids by row-major
   cumulative order appended after the cache;
3. compute the newly needed B^2 x B^2 correlation blocks as tile-pair dot
   products (sampled block-sparse matrix multiplication) and append them to a
   geometrically grown block store;
4. gather a (2r+2)^2 proxy patch of exact correlation cells per source pixel
   and bilinearly combine it into the (2r+1)^2 output window.

Padded tiles hold zero feature vectors, so their correlations are exactly 0 —
the same value zero-padded bilinear sampling assigns out-of-bounds corners —
which is what makes this path agree bit for bit with the on-demand sampler
and the dense pool_features path.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ._backend import get_kernels
from .dense import build_feature_pyramid
from .layout import PatchMajorFeatures, to_patch_major
from .types import (
    CacheLimitError,
    CentroidField,
    CostMaps,
    FeatureMap,
    GatherMissError,
    LookupSpec,
    WorkCounter,
)

#: Default cap on over-allocation beyond current need, per level (5 GiB).
DEFAULT_CACHE_CAP_BYTES = 5 * 2 ** 30

_STEPS = ("mask", "indices", "mmm", "cache", "sampling")


def _default_cache_cap() -> int:
    env = os.environ.get("CORRVOL_CACHE_CAP_BYTES", "").strip()
    if env:
        cap = int(env)
        if cap < 0:
            raise ValueError("CORRVOL_CACHE_CAP_BYTES must be >= 0")
        return cap
    return DEFAULT_CACHE_CAP_BYTES


class BlockStore:
    """Append-only growable store of B^2 x B^2 float32 correlation blocks.

    Capacity grows geometrically (factor 2 by default) but never over-allocates
    more than ``overalloc_cap_bytes`` beyond current need; ``hard_limit_bytes``,
    when set, turns an allocation that need would exceed into an explicit
    CacheLimitError instead of an opaque crash.
    """

    def __init__(
        self,
        block: int,
        growth_factor: int = 2,
        overalloc_cap_bytes: Optional[int] = None,
        hard_limit_bytes: Optional[int] = None,
    ):
        if growth_factor < 2:
            raise ValueError("growth_factor must be >= 2")
        self.block = block
        self.block_cells = block * block
        self.bytes_per_block = 4 * self.block_cells * self.block_cells
        self.growth_factor = growth_factor
        self.overalloc_cap_bytes = (
            _default_cache_cap() if overalloc_cap_bytes is None else overalloc_cap_bytes
        )
        self.hard_limit_bytes = hard_limit_bytes
        self.data = np.empty((0, self.block_cells, self.block_cells), dtype=np.float32)
        self.used = 0
        self.growth_events = 0

    @property
    def capacity(self) -> int:
        return self.data.shape[0]

    def used_bytes(self) -> int:
        return self.used * self.bytes_per_block

    def capacity_bytes(self) -> int:
        return self.capacity * self.bytes_per_block

    def ensure_capacity(self, k_new: int) -> None:
        needed = self.used + k_new
        if self.hard_limit_bytes is not None and needed * self.bytes_per_block > self.hard_limit_bytes:
            raise CacheLimitError(
                f"block cache needs {needed * self.bytes_per_block} bytes, "
                f"hard limit is {self.hard_limit_bytes}"
            )
        if needed <= self.capacity:
            return
        cap = max(self.capacity, 1)
        while cap < needed:
            cap *= self.growth_factor
        cap_blocks = self.overalloc_cap_bytes // self.bytes_per_block
        cap = min(cap, needed + cap_blocks)
        grown = np.empty((cap, self.block_cells, self.block_cells), dtype=np.float32)
        grown[: self.used] = self.data[: self.used]
        self.data = grown
        self.growth_events += 1

    def append(self, blocks: np.ndarray) -> int:
        """Append [k, B^2, B^2] blocks; returns the id of the first one."""
        k = blocks.shape[0]
        start = self.used
        self.data[start : start + k] = blocks
        self.used += k
        return start

    def reset(self) -> None:
        """Forget contents but keep capacity (caching-disabled mode)."""
        self.used = 0


@dataclass
class _LevelState:
    """Per-pyramid-level sparse volume state."""

    tgt_shape: Tuple[int, int]
    pm2: PatchMajorFeatures
    mask_cum: np.ndarray
    mask_union: np.ndarray
    block_ids: np.ndarray
    store: BlockStore

    @property
    def n_tgt_tiles(self) -> int:
        return self.pm2.n_tiles

    @property
    def block_positions(self) -> int:
        return self.mask_cum.shape[0] * self.mask_cum.shape[1]


@dataclass
class ProxyBlock:
    """(2r+2)^2 patch of exact correlation cells for one source pixel.

    Cell (j, i) equals the dense value at target (anchor_y+j, anchor_x+i) of
    its level, or 0 when that coordinate is out of bounds.
    """

    level: int
    anchor_x: int
    anchor_y: int
    values: np.ndarray


class SparseVolumeState:
    """Mask + block-index + block-store form of the correlation volume.

    Mutable single-writer state: callers must serialize sample_iteration
    calls.  The computed-block set is monotonically non-decreasing across
    iterations (unless caching is disabled, which resets it each iteration to
    model the ablation).
    """

    def __init__(
        self,
        f1: FeatureMap,
        spec: LookupSpec,
        block: int,
        pm1: PatchMajorFeatures,
        levels: List[_LevelState],
        cache_enabled: bool,
        backend: Optional[str],
    ):
        self.f1 = f1
        self.spec = spec
        self.block = block
        self.pm1 = pm1
        self.levels = levels
        self.cache_enabled = cache_enabled
        self.backend = backend
        self.iteration = 0
        self.counter = WorkCounter()
        self.timings: Dict[str, float] = {step: 0.0 for step in _STEPS}
        ys, xs = np.divmod(np.arange(f1.height * f1.width, dtype=np.int64), f1.width)
        self.src_tile = (ys // block) * pm1.tiles_x + (xs // block)
        self.src_inner = (ys % block) * block + (xs % block)

    @property
    def n_src_tiles(self) -> int:
        return self.pm1.n_tiles


def init_state(
    f1: FeatureMap,
    f2: FeatureMap,
    spec: LookupSpec,
    block: int,
    cache_cap_bytes: Optional[int] = None,
    hard_limit_bytes: Optional[int] = None,
    growth_factor: int = 2,
    cache_enabled: bool = True,
    backend: Optional[str] = None,
) -> SparseVolumeState:
    """One-time preprocessing for an image pair.

    Pools target features per level, converts both sides to patch-major
    layout, and allocates empty masks/stores.  cache_cap_bytes (per level)
    defaults to CORRVOL_CACHE_CAP_BYTES or 5 GiB.
    """
    if f1.dims != f2.dims:
        raise ValueError(f"feature dims differ: {f1.dims} vs {f2.dims}")
    if block < 1:
        raise ValueError("block must be >= 1")
    pyr = build_feature_pyramid(f2, spec.levels)
    pm1 = to_patch_major(f1, block)
    levels = []
    for lvl in range(spec.levels):
        fmap = pyr.levels[lvl]
        pm2 = to_patch_major(fmap, block)
        shape = (pm1.n_tiles, pm2.n_tiles)
        levels.append(
            _LevelState(
                tgt_shape=(fmap.height, fmap.width),
                pm2=pm2,
                mask_cum=np.zeros(shape, dtype=bool),
                mask_union=np.zeros(shape, dtype=bool),
                block_ids=np.full(shape, -1, dtype=np.int64),
                store=BlockStore(
                    block,
                    growth_factor=growth_factor,
                    overalloc_cap_bytes=cache_cap_bytes,
                    hard_limit_bytes=hard_limit_bytes,
                ),
            )
        )
    return SparseVolumeState(f1, spec, block, pm1, levels, cache_enabled, backend)


def _level_centroid_floors(
    state: SparseVolumeState, centroids: CentroidField, level: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(x0, y0, fx, fy) of per-level centroids, floors as int64."""
    xl = centroids.x_flat() / float(2 ** level)
    yl = centroids.y_flat() / float(2 ** level)
    x0 = np.floor(xl).astype(np.int64)
    y0 = np.floor(yl).astype(np.int64)
    return x0, y0, xl - x0, yl - y0


def set_computation_mask(
    state: SparseVolumeState, centroids: CentroidField, level: int
) -> np.ndarray:
    """This iteration's computation mask for one level (pure; no state change).

    A (source tile, target tile) bit is set iff some target cell at offsets
    -r..r+1 on each axis around the floor of some covered pixel's per-level
    centroid falls into that target tile; cells outside the padded target
    grid set nothing.
    """
    if (centroids.height, centroids.width) != (state.f1.height, state.f1.width):
        raise ValueError("centroid grid does not cover the source grid")
    lv = state.levels[level]
    b = state.block
    r = state.spec.radius
    pth, ptw = lv.pm2.padded_height, lv.pm2.padded_width
    x0, y0, _, _ = _level_centroid_floors(state, centroids, level)
    offs = np.arange(-r, r + 2, dtype=np.int64)
    ty = y0[:, None] + offs[None, :]
    tx = x0[:, None] + offs[None, :]
    p, k = ty.shape
    valid = ((ty >= 0) & (ty < pth))[:, :, None] & ((tx >= 0) & (tx < ptw))[:, None, :]
    ty_b = np.broadcast_to(ty[:, :, None], (p, k, k))
    tx_b = np.broadcast_to(tx[:, None, :], (p, k, k))
    sb_b = np.broadcast_to(state.src_tile[:, None, None], (p, k, k))
    mask = np.zeros((state.n_src_tiles, lv.n_tgt_tiles), dtype=bool)
    tb = (ty_b[valid] // b) * lv.pm2.tiles_x + tx_b[valid] // b
    mask[sb_b[valid], tb] = True
    return mask


def compute_block_indices(
    state: SparseVolumeState, new_mask: np.ndarray, level: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Assign ids to this iteration's newly needed blocks.

    Returns (flat positions, ids): positions index the row-major flattened
    (source tile, target tile) grid; ids continue the store's current size in
    row-major cumulative order.  Updates the cumulative mask and id table.
    """
    lv = state.levels[level]
    newly = new_mask & ~lv.mask_cum
    positions = np.flatnonzero(newly.ravel())
    ids = lv.store.used + np.arange(positions.size, dtype=np.int64)
    lv.block_ids.reshape(-1)[positions] = ids
    lv.mask_cum |= new_mask
    lv.mask_union |= new_mask
    return positions, ids


def sampled_block_mmm(
    state: SparseVolumeState,
    level: int,
    positions: np.ndarray,
    timings: Optional[Dict[str, float]] = None,
) -> np.ndarray:
    """Compute and append the B^2 x B^2 blocks at the given flat positions.

    Each block holds all pairwise dot products between the patch-major rows
    of its source tile and target tile (ascending-channel float32, exactly the
    dense arithmetic).  Returns the [k, B^2, B^2] array that was appended.
    """
    lv = state.levels[level]
    kern = get_kernels(state.backend)
    k = positions.size
    b2 = state.block * state.block
    if k == 0:
        return np.empty((0, b2, b2), dtype=np.float32)
    t0 = time.perf_counter()
    lv.store.ensure_capacity(k)
    t1 = time.perf_counter()
    src_tiles = positions // lv.n_tgt_tiles
    tgt_tiles = positions % lv.n_tgt_tiles
    at = state.pm1.tiles()[src_tiles]
    bt = lv.pm2.tiles()[tgt_tiles]
    blocks = kern.block_mmm(at, bt)
    t2 = time.perf_counter()
    lv.store.append(blocks)
    t3 = time.perf_counter()
    if timings is not None:
        timings["cache"] += (t1 - t0) + (t3 - t2)
        timings["mmm"] += t2 - t1
    state.counter.blocks_computed += k
    state.counter.add_dots(k * b2 * b2, state.f1.dims)
    return blocks


def _gather_patches(
    state: SparseVolumeState, level: int, x0: np.ndarray, y0: np.ndarray
) -> np.ndarray:
    """[P, 2r+2, 2r+2] proxy patches for all source pixels at one level."""
    lv = state.levels[level]
    b = state.block
    r = state.spec.radius
    pth, ptw = lv.pm2.padded_height, lv.pm2.padded_width
    offs = np.arange(-r, r + 2, dtype=np.int64)
    ty = y0[:, None] + offs[None, :]
    tx = x0[:, None] + offs[None, :]
    p, k = ty.shape
    valid = ((ty >= 0) & (ty < pth))[:, :, None] & ((tx >= 0) & (tx < ptw))[:, None, :]
    tyc = np.clip(ty, 0, pth - 1)
    txc = np.clip(tx, 0, ptw - 1)
    tb = (tyc[:, :, None] // b) * lv.pm2.tiles_x + txc[:, None, :] // b
    bid = lv.block_ids[state.src_tile[:, None, None], tb]
    missing = valid & (bid < 0)
    if missing.any():
        pix, jj, ii = np.argwhere(missing)[0]
        raise GatherMissError(
            f"level {level}: pixel {int(pix)} needs target cell "
            f"({int(ty[pix, jj])}, {int(tx[pix, ii])}) whose block was never computed"
        )
    t_inner = (tyc[:, :, None] % b) * b + txc[:, None, :] % b
    vals = lv.store.data[np.where(bid < 0, 0, bid), state.src_inner[:, None, None], t_inner]
    return np.where(valid, vals, np.float32(0.0))


def gather_proxy(
    state: SparseVolumeState, level: int, pixel: int, centroid: Tuple[float, float]
) -> ProxyBlock:
    """Proxy patch for one source pixel (single-cell gathering, loop form).

    pixel is the row-major source index; centroid the level-0 (x, y) lookup
    center.  Requires the covering blocks to be present (set_computation_mask
    + sampled_block_mmm for this centroid must have run).
    """
    lv = state.levels[level]
    b = state.block
    r = state.spec.radius
    k = state.spec.support
    pth, ptw = lv.pm2.padded_height, lv.pm2.padded_width
    x0 = math.floor(centroid[0] / (2 ** level))
    y0 = math.floor(centroid[1] / (2 ** level))
    out = np.zeros((k, k), dtype=np.float32)
    for j in range(k):
        for i in range(k):
            ty, tx = y0 - r + j, x0 - r + i
            if not (0 <= ty < pth and 0 <= tx < ptw):
                continue
            tb = (ty // b) * lv.pm2.tiles_x + tx // b
            bid = lv.block_ids[state.src_tile[pixel], tb]
            if bid < 0:
                raise GatherMissError(
                    f"level {level}: pixel {pixel} needs target cell ({ty}, {tx}) "
                    "whose block was never computed"
                )
            out[j, i] = lv.store.data[bid, state.src_inner[pixel], (ty % b) * b + tx % b]
    return ProxyBlock(level=level, anchor_x=x0 - r, anchor_y=y0 - r, values=out)


def sample_iteration(state: SparseVolumeState, centroids: CentroidField) -> CostMaps:
    """Run mask -> indices -> block MMM -> cache -> gather -> bilinear sampling.

    Output contract is identical to lookup_dense.  With caching enabled only
    the incremental block set is computed; with caching disabled the per-level
    stores and masks are reset first, modeling the recompute-everything
    ablation."""
    f1 = state.f1
    if (centroids.height, centroids.width) != (f1.height, f1.width):
        raise ValueError("centroid grid does not cover the source grid")
    spec = state.spec
    kern = get_kernels(state.backend)
    p = f1.height * f1.width
    k1 = spec.window
    scale = np.float32(1.0 / math.sqrt(f1.dims)) if spec.normalize else None
    if not state.cache_enabled:
        for lv in state.levels:
            lv.mask_cum[:] = False
            lv.block_ids[:] = -1
            lv.store.reset()
    out = np.empty((p, spec.levels, k1, k1), dtype=np.float32)
    for lvl in range(spec.levels):
        t0 = time.perf_counter()
        mask = set_computation_mask(state, centroids, lvl)
        t1 = time.perf_counter()
        positions, _ = compute_block_indices(state, mask, lvl)
        t2 = time.perf_counter()
        state.timings["mask"] += t1 - t0
        state.timings["indices"] += t2 - t1
        sampled_block_mmm(state, lvl, positions, timings=state.timings)
        t3 = time.perf_counter()
        x0, y0, fx, fy = _level_centroid_floors(state, centroids, lvl)
        patch = _gather_patches(state, lvl, x0, y0)
        taps = kern.combine_taps(patch, fx, fy)
        if scale is not None:
            taps = taps * scale
        out[:, lvl] = taps
        state.timings["sampling"] += time.perf_counter() - t3
    state.iteration += 1
    return CostMaps(
        values=out.reshape(f1.height, f1.width, spec.levels, k1, k1), radius=spec.radius
    )


def memory_footprint(state: SparseVolumeState) -> Dict:
    """Byte accounting of the sparse volume state.

    Reports, per level and in total: the cumulative computation mask at one
    bit per block position (the packed format a production kernel would
    keep; the in-memory bool arrays trade 8x space for speed), stored-block
    bytes (used blocks only), allocated capacity bytes, and patch-major
    feature bytes.  total_bytes = mask + capacity + features, i.e. what the
    algorithm holds on to between iterations.
    """
    per_level = []
    mask_total = 0
    used_total = 0
    cap_total = 0
    feat_total = state.pm1.values.nbytes
    blocks_used_total = 0
    for lvl, lv in enumerate(state.levels):
        mask_bytes = (lv.mask_cum.size + 7) // 8
        entry = {
            "level": lvl,
            "mask_bytes": mask_bytes,
            "block_bytes": lv.store.used_bytes(),
            "capacity_bytes": lv.store.capacity_bytes(),
            "feature_bytes": lv.pm2.values.nbytes,
            "blocks_used": lv.store.used,
            "block_positions": lv.block_positions,
        }
        per_level.append(entry)
        mask_total += mask_bytes
        used_total += lv.store.used_bytes()
        cap_total += lv.store.capacity_bytes()
        feat_total += lv.pm2.values.nbytes
        blocks_used_total += lv.store.used
    return {
        "levels": per_level,
        "mask_bytes": mask_total,
        "block_bytes": used_total,
        "capacity_bytes": cap_total,
        "feature_bytes": feat_total,
        "blocks_used": blocks_used_total,
        "total_bytes": mask_total + cap_total + feat_total,
    }
