"""Flow-field file I/O, error metrics, and resolution-cascade resampling.

The on-disk format is the Middlebury ``.flo`` layout: a 4-byte float32
magic (202021.25), little-endian int32 width and height, then H*W
interleaved (u, v) float32 pairs in row-major order.  Reading is strict —
wrong magic, wrong byte count, absurd header dims, and non-finite payloads
each raise a distinct error type rather than propagating garbage.

Flow vectors are always stored in the units of their own grid.  Under that
convention :func:`resample_flow` preserves geometric correspondence by
scaling magnitudes together with the grid, and the cascade initialization
becomes a single half-scale resample (see :func:`cascaded_init`).
"""

from __future__ import annotations

import struct
from typing import Optional, Tuple

import numpy as np

from .types import DimensionMismatchError, FlowField

#: Ground-truth displacement magnitude (in pixels) above which a pixel
#: counts toward the large-motion metrics.  Strictly greater-than.
LARGE_MOTION_THRESHOLD = 128.0

#: Minimum input dimension (in pixels) above which a resolution cascade is
#: worthwhile.  Documented for callers that orchestrate inference; nothing
#: in this package acts on it.
CASCADE_MIN_DIMENSION = 800

_MAGIC = 202021.25
_MAGIC_BYTES = struct.pack("<f", _MAGIC)
#: Upper bound on header dims; guards against allocating on corrupt headers.
_MAX_DIM = 1 << 20


class FloFormatError(Exception):
    """Base class for .flo parsing failures."""


class FloMagicError(FloFormatError):
    """The 4-byte magic tag is not the float32 202021.25."""


class FloTruncatedError(FloFormatError):
    """The file size does not match the header's promised payload."""


class FloHeaderError(FloFormatError):
    """Width/height are non-positive or implausibly large."""


class FloNonFiniteError(FloFormatError):
    """The payload contains NaN or infinite components."""


def read_flo(path: str) -> FlowField:
    """Read a Middlebury .flo file, validating every structural invariant."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 12:
        raise FloTruncatedError(f"{path}: {len(buf)} bytes; a .flo header needs 12")
    if buf[:4] != _MAGIC_BYTES:
        got = struct.unpack("<f", buf[:4])[0]
        raise FloMagicError(f"{path}: magic {got!r} != {_MAGIC}")
    width, height = struct.unpack("<ii", buf[4:12])
    if width < 1 or height < 1 or width > _MAX_DIM or height > _MAX_DIM:
        raise FloHeaderError(f"{path}: implausible dims {width}x{height}")
    expected = 12 + 8 * width * height
    if len(buf) != expected:
        raise FloTruncatedError(
            f"{path}: expected {expected} bytes for {width}x{height}, found {len(buf)}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=2 * width * height, offset=12)
    vectors = np.array(data, dtype=np.float32).reshape(height, width, 2)
    if not np.isfinite(vectors).all():
        raise FloNonFiniteError(f"{path}: payload contains non-finite values")
    return FlowField(vectors=vectors)


def write_flo(field: FlowField, path: str) -> None:
    """Write a flow field in Middlebury .flo layout (little-endian, bit-exact)."""
    h, w = field.vectors.shape[:2]
    payload = np.ascontiguousarray(field.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC_BYTES)
        fh.write(struct.pack("<ii", w, h))
        fh.write(payload)


def _check_dims(pred: FlowField, gt: FlowField) -> None:
    if pred.vectors.shape != gt.vectors.shape:
        raise DimensionMismatchError(
            f"flow dims differ: {pred.vectors.shape[:2]} vs {gt.vectors.shape[:2]}"
        )


def _endpoint_errors(pred: FlowField, gt: FlowField) -> np.ndarray:
    diff = pred.vectors.astype(np.float64) - gt.vectors.astype(np.float64)
    return np.sqrt((diff ** 2).sum(axis=-1))


def _sequential_mean(values: np.ndarray) -> float:
    # Row-major left-to-right accumulation (cumsum is defined element by
    # element), so the reduction order is pinned no matter how the metric is
    # vectorized or sharded.
    flat = values.ravel()
    return float(np.cumsum(flat)[-1]) / flat.size


def epe(pred: FlowField, gt: FlowField) -> float:
    """Mean endpoint error: mean over pixels of the L2 displacement error."""
    _check_dims(pred, gt)
    return _sequential_mean(_endpoint_errors(pred, gt))


def outlier_1px(pred: FlowField, gt: FlowField) -> float:
    """Percent of pixels with endpoint error strictly greater than 1 pixel."""
    _check_dims(pred, gt)
    err = _endpoint_errors(pred, gt)
    return float(100.0 * (err > 1.0).sum() / err.size)


def large_motion_metrics(
    pred: FlowField, gt: FlowField
) -> Optional[Tuple[float, float]]:
    """(1px-outlier percent, mean EPE) over pixels with ‖gt‖ > 128.

    Returns None when no pixel qualifies: the metrics are undefined there,
    and callers (e.g. the metrics CSV) must render an explicit marker rather
    than a number.
    """
    _check_dims(pred, gt)
    mag = np.sqrt((gt.vectors.astype(np.float64) ** 2).sum(axis=-1))
    mask = mag > LARGE_MOTION_THRESHOLD
    n = int(mask.sum())
    if n == 0:
        return None
    err = _endpoint_errors(pred, gt)[mask]
    return (float(100.0 * (err > 1.0).sum() / n), _sequential_mean(err))


def large_motion_count(gt: FlowField) -> int:
    """Number of pixels whose ground-truth magnitude exceeds the LM threshold."""
    mag = np.sqrt((gt.vectors.astype(np.float64) ** 2).sum(axis=-1))
    return int((mag > LARGE_MOTION_THRESHOLD).sum())


def resample_flow(field: FlowField, scale: float) -> FlowField:
    """Bilinearly resample a flow field to scaled dims, scaling magnitudes too.

    Output dims are round(dim * scale) (half-up), each at least 1.  Sample
    positions map output pixel centers onto input pixel centers
    (src = (out + 0.5)/scale - 0.5) with edge clamping, so a constant field
    stays constant.  Because vectors live in own-grid units, magnitudes are
    multiplied by the same scale to keep the geometric correspondence:
    resample_flow(resample_flow(f, s), 1/s) ≈ f up to interpolation error.
    """
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError(f"scale must be a positive finite number, got {scale!r}")
    h, w = field.vectors.shape[:2]
    out_h = int(np.floor(h * scale + 0.5))
    out_w = int(np.floor(w * scale + 0.5))
    if out_h < 1 or out_w < 1:
        raise ValueError(f"scale {scale} collapses {h}x{w} to {out_h}x{out_w}")
    src = field.vectors.astype(np.float64)
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) / scale - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) / scale - 0.5
    sy = np.clip(sy, 0.0, h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]
    v00 = src[y0[:, None], x0[None, :]]
    v01 = src[y0[:, None], x1[None, :]]
    v10 = src[y1[:, None], x0[None, :]]
    v11 = src[y1[:, None], x1[None, :]]
    wy0 = 1.0 - fy
    wx0 = 1.0 - fx
    out = ((v00 * (wy0 * wx0) + v01 * (wy0 * fx)) + v10 * (fy * wx0)) + v11 * (fy * fx)
    return FlowField(vectors=(out * scale).astype(np.float32))


def cascaded_init(low_res_flow: FlowField) -> FlowField:
    """Initial flow for a full-resolution pass from a quarter-resolution output.

    A quarter-resolution pass emits flow on its own input grid (H/4 x W/4, in
    H/4-grid units).  The full-resolution pass updates flow on its eighth-
    resolution grid (H/8 x W/8, in H/8-grid units).  Getting from the former
    to the latter is a single half-scale resample: dims halve, and a true
    scene displacement of d full-resolution pixels goes from d/4 to d/8 —
    exactly the factor-0.5 magnitude scaling resample_flow applies.
    """
    return resample_flow(low_res_flow, 0.5)


METRICS_CSV_SCHEMA = "# corrvol-metrics-csv v1"


def metrics_csv(pred: FlowField, gt: FlowField) -> str:
    """Evaluation metrics as CSV rows of (metric, value, pixel_count).

    Large-motion rows carry the count of qualifying pixels and render "n/a"
    when that count is zero.
    """
    _check_dims(pred, gt)
    total = pred.vectors.shape[0] * pred.vectors.shape[1]
    lm = large_motion_metrics(pred, gt)
    lm_n = large_motion_count(gt)
    lines = [
        METRICS_CSV_SCHEMA,
        "metric,value,pixel_count",
        f"epe,{epe(pred, gt):.6f},{total}",
        f"outlier_1px,{outlier_1px(pred, gt):.6f},{total}",
    ]
    if lm is None:
        lines.append(f"lm_1px,n/a,{lm_n}")
        lines.append(f"lm_epe,n/a,{lm_n}")
    else:
        lines.append(f"lm_1px,{lm[0]:.6f},{lm_n}")
        lines.append(f"lm_epe,{lm[1]:.6f},{lm_n}")
    return "\n".join(lines) + "\n"
