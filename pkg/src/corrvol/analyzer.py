"""Instrumented access recording and block-occupancy analysis.

record_run replays a scenario's centroid sequence and logs every correlation
cell reached with nonzero bilinear weight (deduplicated across iterations, as
the footprint accumulates over all update iterations).  occupancy partitions
the level-0 volume into B^2 x B^2 blocks under either memory layout and
reports the percentage containing at least one touched cell:

* row-major: a block groups B^2 consecutive raster indices on each side
  (source rows of the volume matrix x target columns);
* patch-major: a block groups one B x B spatial tile on each side, i.e. the
  blocks the sparse sampler actually computes.

At B=1 the layouts partition identically, so their occupancies must agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import mean, pstdev
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .dense import pooled_dims
from .types import AccessLog

LAYOUTS = ("row-major", "patch-major")


def record_run(scenario) -> List[AccessLog]:
    """Per-level access logs of a full scenario run.

    Pure geometry over the centroid sequence: a cell is logged iff some
    bilinear tap corner with weight > 0 lands on it in some iteration.  All
    samplers touch exactly this cell set (they agree bit for bit), so the log
    is sampler-independent.
    """
    h1, w1 = scenario.height, scenario.width
    r = scenario.spec.radius
    logs = []
    offs = np.arange(-r, r + 2, dtype=np.int64)
    for lvl in range(scenario.spec.levels):
        th, tw = pooled_dims((scenario.tgt_height, scenario.tgt_width), lvl)
        seen: List[np.ndarray] = []
        for cents in scenario.centroid_fields:
            xl = cents.x_flat() / float(2 ** lvl)
            yl = cents.y_flat() / float(2 ** lvl)
            x0 = np.floor(xl).astype(np.int64)
            y0 = np.floor(yl).astype(np.int64)
            fx = xl - x0
            fy = yl - y0
            ty = y0[:, None] + offs[None, :]
            tx = x0[:, None] + offs[None, :]
            # weight of corner column j (offset -r..r+1 from x0): every tap
            # column uses either fx or 1-fx; the extreme columns appear only
            # with one of them, so a zero fractional part zeroes the last
            # column (and symmetrically the last row).
            k = offs.size
            wx_nonzero = np.ones((tx.shape[0], k), dtype=bool)
            wx_nonzero[:, -1] = fx > 0.0
            wy_nonzero = np.ones((ty.shape[0], k), dtype=bool)
            wy_nonzero[:, -1] = fy > 0.0
            valid = (
                ((ty >= 0) & (ty < th) & wy_nonzero)[:, :, None]
                & ((tx >= 0) & (tx < tw) & wx_nonzero)[:, None, :]
            )
            p = tx.shape[0]
            src = np.broadcast_to(
                np.arange(p, dtype=np.int64)[:, None, None], valid.shape
            )[valid]
            ty_b = np.broadcast_to(ty[:, :, None], valid.shape)[valid]
            tx_b = np.broadcast_to(tx[:, None, :], valid.shape)[valid]
            codes = src * (th * tw) + ty_b * tw + tx_b
            seen.append(np.unique(codes))
        entries = np.unique(np.concatenate(seen)) if seen else np.empty(0, dtype=np.int64)
        logs.append(
            AccessLog(level=lvl, src_shape=(h1, w1), tgt_shape=(th, tw), entries=entries)
        )
    return logs


def _group_indices(linear: np.ndarray, shape: Tuple[int, int], block: int, layout: str) -> Tuple[np.ndarray, int]:
    """Map linear cell indices to block-group indices under a layout."""
    h, w = shape
    cells = h * w
    if layout == "row-major":
        b2 = block * block
        return linear // b2, (cells + b2 - 1) // b2
    if layout == "patch-major":
        tiles_x = (w + block - 1) // block
        tiles_y = (h + block - 1) // block
        y, x = np.divmod(linear, w)
        return (y // block) * tiles_x + x // block, tiles_y * tiles_x
    raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")


def occupancy(log: AccessLog, block: int, layout: str) -> float:
    """Percent of B^2 x B^2 blocks of the log's volume containing a touched cell."""
    if block < 1:
        raise ValueError("block must be >= 1")
    src, tgt = log.pairs()
    gs, n_gs = _group_indices(src, log.src_shape, block, layout)
    gt, n_gt = _group_indices(tgt, log.tgt_shape, block, layout)
    touched = np.unique(gs * n_gt + gt).size
    return 100.0 * touched / (n_gs * n_gt)


def block_counts(log: AccessLog, block: int, layout: str) -> np.ndarray:
    """Touched-cell count per block position: [n_src_groups, n_tgt_groups] int64."""
    src, tgt = log.pairs()
    gs, n_gs = _group_indices(src, log.src_shape, block, layout)
    gt, n_gt = _group_indices(tgt, log.tgt_shape, block, layout)
    out = np.zeros((n_gs, n_gt), dtype=np.int64)
    np.add.at(out, (gs, gt), 1)
    return out


@dataclass
class OccupancyReport:
    """Corpus occupancy summary for one (block size, layout) pair."""

    block_size: int
    layout: str
    mean_percent: float
    stdev_percent: float
    samples: int


def corpus_occupancy(
    logs: Sequence[AccessLog], block_sizes: Iterable[int], layouts: Iterable[str] = LAYOUTS
) -> List[OccupancyReport]:
    """Occupancy reports over a corpus of level-0 logs.

    B=1 is layout-independent (layout only permutes cells), so it is emitted
    once with layout "both".
    """
    reports = []
    for b in block_sizes:
        use_layouts = ["both"] if b == 1 else list(layouts)
        for layout in use_layouts:
            actual = "row-major" if layout == "both" else layout
            vals = [occupancy(log, b, actual) for log in logs]
            reports.append(
                OccupancyReport(
                    block_size=b,
                    layout=layout,
                    mean_percent=mean(vals),
                    stdev_percent=pstdev(vals) if len(vals) > 1 else 0.0,
                    samples=len(vals),
                )
            )
    return reports


OCCUPANCY_CSV_SCHEMA = "# corrvol-occupancy-csv v1"


def occupancy_csv(reports: Sequence[OccupancyReport]) -> str:
    lines = [OCCUPANCY_CSV_SCHEMA, "block_size,layout,mean_percent,stdev_percent,samples"]
    for rep in reports:
        lines.append(
            f"{rep.block_size},{rep.layout},{rep.mean_percent:.6f},"
            f"{rep.stdev_percent:.6f},{rep.samples}"
        )
    return "\n".join(lines) + "\n"
