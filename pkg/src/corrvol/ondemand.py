"""On-demand sampler: evaluate each bilinear tap directly, no stored volume.

This is the memory-minimal baseline: every tap expands into up to four fresh
dot products between the source feature and pooled target features; nothing
is reused across taps or iterations, so its work grows strictly linearly with
iteration count.  Values agree bit for bit with the dense pool_features path
(the dots and the combination use identical arithmetic); only the work
profile differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._backend import get_kernels
from .dense import pooled_dims
from .types import CentroidField, CostMaps, FeatureMap, FeaturePyramid, LookupSpec, WorkCounter

_CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))


def lookup_on_demand(
    f1: FeatureMap,
    pyr: FeaturePyramid,
    centroids: CentroidField,
    spec: LookupSpec,
    backend: Optional[str] = None,
    counter: Optional[WorkCounter] = None,
) -> CostMaps:
    """Sample lookup windows by computing each tap's dot products directly.

    Output contract is identical to lookup_dense.  A tap whose 2x2 support is
    fully outside the level grid short-circuits to 0; partially supported
    taps compute only the in-bounds corners.  ``counter`` tallies one
    dot product per in-bounds corner actually evaluated.
    """
    if f1.dims != pyr.dims:
        raise ValueError(f"feature dims differ: {f1.dims} vs {pyr.dims}")
    if spec.levels > len(pyr):
        raise ValueError(f"lookup wants {spec.levels} levels, pyramid has {len(pyr)}")
    h1, w1 = f1.height, f1.width
    if (centroids.height, centroids.width) != (h1, w1):
        raise ValueError(
            f"centroid grid {centroids.height}x{centroids.width} does not cover source {h1}x{w1}"
        )
    kern = get_kernels(backend)
    p = h1 * w1
    k1 = spec.window
    r = spec.radius
    f1_flat = f1.flat()
    cx = centroids.x_flat()
    cy = centroids.y_flat()
    scale = np.float32(1.0 / math.sqrt(f1.dims)) if spec.normalize else None
    out = np.empty((p, spec.levels, k1, k1), dtype=np.float32)
    for lvl in range(spec.levels):
        fmap = pyr.levels[lvl]
        th, tw = fmap.height, fmap.width
        f2_flat = fmap.flat()
        xl = cx / float(2 ** lvl)
        yl = cy / float(2 ** lvl)
        x0 = np.floor(xl).astype(np.int64)
        y0 = np.floor(yl).astype(np.int64)
        fx = xl - x0
        fy = yl - y0
        wx1, wy1 = fx, fy
        wx0, wy0 = 1.0 - fx, 1.0 - fy
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                vals = []
                for (oy, ox) in _CORNERS:
                    ty = y0 + (dy + oy)
                    tx = x0 + (dx + ox)
                    valid = (ty >= 0) & (ty < th) & (tx >= 0) & (tx < tw)
                    idx = np.clip(ty, 0, th - 1) * tw + np.clip(tx, 0, tw - 1)
                    vals.append(
                        kern.corr_gather(f1_flat, f2_flat, idx, valid.astype(np.uint8))
                    )
                    if counter is not None:
                        counter.add_dots(int(valid.sum()), f1.dims)
                taps = kern.combine_corners(
                    vals[0], vals[1], vals[2], vals[3], wx0, wx1, wy0, wy1
                ).astype(np.float32)
                if scale is not None:
                    taps = taps * scale
                out[:, lvl, dy + r, dx + r] = taps
    return CostMaps(values=out.reshape(h1, w1, spec.levels, k1, k1), radius=spec.radius)


@dataclass(frozen=True)
class WorkCount:
    """Exact on-demand work model for a centroid sequence.

    dot_products: length-D dots a literal per-tap sampler executes (one per
    in-bounds tap corner; weight-0 in-bounds corners included, out-of-bounds
    corners skipped).  upper_bound_macs is the no-boundary closed form
    iterations * H*W * L * (2r+1)^2 * 4 * D.
    """

    dot_products: int
    macs: int
    upper_bound_macs: int


def count_work_on_demand(
    dims: Tuple[int, int, int],
    spec: LookupSpec,
    centroid_fields: Sequence[CentroidField],
    tgt_shape: Optional[Tuple[int, int]] = None,
) -> WorkCount:
    """Multiply-add count of the on-demand sampler over an iteration sequence.

    dims: (H, W, D) of the source grid and feature depth.  tgt_shape defaults
    to the source grid (same-size image pairs).  The count is the one
    lookup_on_demand's counter reports when run on the same centroids; it is
    strictly linear in the number of iterations because nothing is reused.
    """
    h1, w1, d = dims
    if tgt_shape is None:
        tgt_shape = (h1, w1)
    r = spec.radius
    dots = 0
    for cents in centroid_fields:
        if (cents.height, cents.width) != (h1, w1):
            raise ValueError("centroid grid does not match source dims")
        cx = cents.x_flat()
        cy = cents.y_flat()
        for lvl in range(spec.levels):
            th, tw = pooled_dims(tgt_shape, lvl)
            x0 = np.floor(cx / float(2 ** lvl)).astype(np.int64)
            y0 = np.floor(cy / float(2 ** lvl)).astype(np.int64)
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    for (oy, ox) in _CORNERS:
                        ty = y0 + (dy + oy)
                        tx = x0 + (dx + ox)
                        valid = (ty >= 0) & (ty < th) & (tx >= 0) & (tx < tw)
                        dots += int(valid.sum())
    n = len(centroid_fields)
    upper = n * h1 * w1 * spec.levels * spec.window ** 2 * 4 * d
    return WorkCount(dot_products=dots, macs=dots * d, upper_bound_macs=upper)
