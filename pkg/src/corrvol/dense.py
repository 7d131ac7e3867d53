"""Dense reference sampler: full correlation volume, pooled pyramid, lookup.

This is the equivalence oracle for the on-demand and block-sparse samplers.
The level-0 volume holds every pairwise dot product between source and target
features; deeper levels are produced either by 2x2 average pooling of the
volume's target dimensions (``pool_volume``, the classical formulation and
the default) or by correlating against average-pooled target features
(``pool_features``).  The two commute up to float rounding: pooling is linear
and the dot product is linear, so the paths agree to ~1e-6 relative, and the
pool_features path shares its arithmetic bit for bit with the other samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ._backend import get_kernels
from .types import CentroidField, CostMaps, FeatureMap, FeaturePyramid, LookupSpec, WorkCounter

PYRAMID_MODES = ("pool_volume", "pool_features")


def build_dense_volume(
    f1: FeatureMap,
    f2: FeatureMap,
    backend: Optional[str] = None,
    counter: Optional[WorkCounter] = None,
) -> np.ndarray:
    """Level-0 all-pairs correlation matrix [H1*W1, H2*W2] float32.

    Entry (i, j) is the float32 dot product of source feature i and target
    feature j, accumulated in ascending channel order (so a naive triple-loop
    evaluation reproduces it exactly).
    """
    if f1.dims != f2.dims:
        raise ValueError(f"feature dims differ: {f1.dims} vs {f2.dims}")
    kern = get_kernels(backend)
    out = kern.corr_pairs(f1.flat(), f2.flat())
    if counter is not None:
        counter.add_dots(out.shape[0] * out.shape[1], f1.dims)
    return out


def pool_volume(mat: np.ndarray, tgt_shape: Tuple[int, int]) -> np.ndarray:
    """2x2/stride-2 average pooling of the volume's target dimensions.

    mat: [P1, Ht*Wt]; returns [P1, (Ht//2)*(Wt//2)].  A trailing odd target
    row/column is discarded (floor semantics); target dims below 2 raise.
    """
    th, tw = tgt_shape
    if mat.shape[1] != th * tw:
        raise ValueError(f"matrix has {mat.shape[1]} target cells, expected {th}x{tw}")
    kern = get_kernels("python")
    grids = mat.reshape(-1, th, tw).transpose(1, 2, 0)
    pooled = kern.pool2x2(grids)
    return np.ascontiguousarray(pooled.transpose(2, 0, 1).reshape(mat.shape[0], -1))


def pooled_dims(shape: Tuple[int, int], level: int) -> Tuple[int, int]:
    """Target grid dims after ``level`` rounds of 2x2 pooling (floor)."""
    h, w = shape
    for _ in range(level):
        h, w = h // 2, w // 2
    return h, w


def build_feature_pyramid(f2: FeatureMap, levels: int) -> FeaturePyramid:
    """L-level pyramid: level l is the l-fold 2x2 average pool of f2."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    fh, fw = pooled_dims((f2.height, f2.width), levels - 1)
    if fh < 1 or fw < 1:
        raise ValueError(
            f"pyramid of {levels} levels on {f2.height}x{f2.width} would produce an empty level"
        )
    kern = get_kernels("python")
    maps = [f2]
    vals = f2.values
    for _ in range(levels - 1):
        vals = kern.pool2x2(vals)
        maps.append(FeatureMap(values=vals))
    return FeaturePyramid(levels=maps)


@dataclass
class DenseCorrelationVolume:
    """Precomputed multi-level correlation volume.

    level_mats[l]: [H1*W1, H2_l*W2_l] float32; level_shapes[l] the target
    grid dims of level l.  mode records how deeper levels were produced.
    """

    src_shape: Tuple[int, int]
    dims: int
    level_mats: List[np.ndarray]
    level_shapes: List[Tuple[int, int]]
    mode: str

    @property
    def levels(self) -> int:
        return len(self.level_mats)

    def nbytes(self) -> int:
        return sum(m.nbytes for m in self.level_mats)


def estimate_dense_bytes(src_shape: Tuple[int, int], tgt_shape: Tuple[int, int], levels: int) -> int:
    """Bytes of float32 storage a dense volume of these dims would need."""
    p1 = src_shape[0] * src_shape[1]
    total = 0
    for lvl in range(levels):
        th, tw = pooled_dims(tgt_shape, lvl)
        total += 4 * p1 * th * tw
    return total


def build_volume_pyramid(
    f1: FeatureMap,
    f2: FeatureMap,
    levels: int,
    mode: str = "pool_volume",
    backend: Optional[str] = None,
    counter: Optional[WorkCounter] = None,
) -> DenseCorrelationVolume:
    """Dense volume with an L-level pooled pyramid.

    mode="pool_volume" pools the level-0 volume's target dims (default);
    mode="pool_features" correlates against pooled target features instead,
    sharing its dot-product arithmetic exactly with the other samplers.
    """
    if mode not in PYRAMID_MODES:
        raise ValueError(f"mode must be one of {PYRAMID_MODES}, got {mode!r}")
    fh, fw = pooled_dims((f2.height, f2.width), levels - 1)
    if fh < 1 or fw < 1:
        raise ValueError(
            f"{levels}-level volume on target {f2.height}x{f2.width} would have an empty level"
        )
    mats = [build_dense_volume(f1, f2, backend=backend, counter=counter)]
    shapes = [(f2.height, f2.width)]
    if mode == "pool_volume":
        for lvl in range(1, levels):
            mats.append(pool_volume(mats[-1], shapes[-1]))
            shapes.append(pooled_dims(shapes[-1], 1))
    else:
        pyr = build_feature_pyramid(f2, levels)
        for lvl in range(1, levels):
            fmap = pyr.levels[lvl]
            mats.append(build_dense_volume(f1, fmap, backend=backend, counter=counter))
            shapes.append((fmap.height, fmap.width))
    return DenseCorrelationVolume(
        src_shape=(f1.height, f1.width),
        dims=f1.dims,
        level_mats=mats,
        level_shapes=shapes,
        mode=mode,
    )


def _corner_patches(
    mat: np.ndarray,
    tgt_shape: Tuple[int, int],
    x0: np.ndarray,
    y0: np.ndarray,
    radius: int,
) -> np.ndarray:
    """Gather per-pixel (2r+2)^2 corner patches from a volume level.

    mat: [P, Ht*Wt]; x0, y0: [P] int64 floors of per-level centroids.
    Returns [P, K, K] float32 with out-of-bounds cells exactly 0.
    """
    th, tw = tgt_shape
    p = mat.shape[0]
    offs = np.arange(-radius, radius + 2, dtype=np.int64)
    ty = y0[:, None] + offs[None, :]
    tx = x0[:, None] + offs[None, :]
    valid = ((ty >= 0) & (ty < th))[:, :, None] & ((tx >= 0) & (tx < tw))[:, None, :]
    tyc = np.clip(ty, 0, th - 1)[:, :, None]
    txc = np.clip(tx, 0, tw - 1)[:, None, :]
    flat = tyc * tw + txc
    vals = mat[np.arange(p)[:, None, None], flat]
    return np.where(valid, vals, np.float32(0.0))


def lookup_dense(
    vol: DenseCorrelationVolume,
    centroids: CentroidField,
    spec: LookupSpec,
) -> CostMaps:
    """Bilinearly sample (2r+1)^2 windows around per-level centroids.

    For source pixel i, level l, offset (dy, dx) the value is the zero-padded
    bilinear tap of level l's target grid (row i of the level matrix) at
    (x/2^l + dx, y/2^l + dy).  Offsets are ordered dy-major, dx-minor.
    """
    h1, w1 = vol.src_shape
    if (centroids.height, centroids.width) != (h1, w1):
        raise ValueError(
            f"centroid grid {centroids.height}x{centroids.width} does not cover source {h1}x{w1}"
        )
    if spec.levels > vol.levels:
        raise ValueError(f"lookup wants {spec.levels} levels, volume has {vol.levels}")
    kern = get_kernels("python")
    p = h1 * w1
    k1 = spec.window
    out = np.empty((p, spec.levels, k1, k1), dtype=np.float32)
    cx = centroids.x_flat()
    cy = centroids.y_flat()
    scale = np.float32(1.0 / math.sqrt(vol.dims)) if spec.normalize else None
    for lvl in range(spec.levels):
        xl = cx / float(2 ** lvl)
        yl = cy / float(2 ** lvl)
        x0 = np.floor(xl).astype(np.int64)
        y0 = np.floor(yl).astype(np.int64)
        patch = _corner_patches(vol.level_mats[lvl], vol.level_shapes[lvl], x0, y0, spec.radius)
        taps = kern.combine_taps(patch, xl - x0, yl - y0)
        if scale is not None:
            taps = taps * scale
        out[:, lvl] = taps
    return CostMaps(values=out.reshape(h1, w1, spec.levels, k1, k1), radius=spec.radius)
