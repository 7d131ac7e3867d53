"""Pure-numpy kernel lane plus arithmetic shared by both lanes.

The three dot-product kernels (corr_pairs, corr_gather, block_mmm) accumulate
in float32, one channel at a time in ascending channel order.  Elementwise
numpy float32 operations round each multiply and each add to nearest exactly
like the scalar loops in the compiled lane (built with -ffp-contract=off), so
the two lanes produce bit-identical results.

pool2x2 and the bilinear combination helpers live here and are used by both
lanes unchanged; only the dot products are worth compiling.
"""

from __future__ import annotations

import numpy as np


def corr_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs float32 dot products.

    a: [n, D] float32, b: [m, D] float32 -> [n, m] float32 with
    out[i, j] = sum_d a[i, d] * b[j, d], accumulated in ascending d.
    """
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"channel counts differ: {a.shape[1]} vs {b.shape[1]}")
    acc = np.zeros((a.shape[0], b.shape[0]), dtype=np.float32)
    for d in range(a.shape[1]):
        acc += a[:, d, None] * b[None, :, d]
    return acc


def corr_gather(f1: np.ndarray, f2: np.ndarray, idx: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Row-wise float32 dots of f1 rows against gathered f2 rows.

    f1: [P, D] float32; f2: [M, D] float32; idx: [P] int64 row indices into
    f2 (ignored where invalid); valid: [P] bool.  Returns [P] float32 with
    out[p] = dot(f1[p], f2[idx[p]]) where valid, else exactly 0.
    """
    j = np.where(valid, idx, 0)
    g = f2[j]
    acc = np.zeros(f1.shape[0], dtype=np.float32)
    for d in range(f1.shape[1]):
        acc += f1[:, d] * g[:, d]
    return np.where(valid, acc, np.float32(0.0))


def block_mmm(at: np.ndarray, bt: np.ndarray) -> np.ndarray:
    """Batched correlation blocks between paired feature tiles.

    at: [k, n, D] float32, bt: [k, m, D] float32 -> [k, n, m] float32 with
    out[q, u, v] = dot(at[q, u], bt[q, v]), accumulated in ascending d.
    """
    k, n, dims = at.shape
    m = bt.shape[1]
    acc = np.zeros((k, n, m), dtype=np.float32)
    for d in range(dims):
        acc += at[:, :, None, d] * bt[:, None, :, d]
    return acc


# ---------------------------------------------------------------------------
# shared arithmetic (identical in both lanes)
# ---------------------------------------------------------------------------

def pool2x2(arr: np.ndarray) -> np.ndarray:
    """2x2/stride-2 average pooling with floor semantics.

    Trailing odd rows/columns are dropped.  Each output cell is
    ((a + b) + (c + d)) * 0.25 in float32 (the multiply by a power of two is
    exact, so the association is the only rounding choice).  Works on [H, W]
    or [H, W, D] float32 arrays; channels are pooled independently.
    """
    h = arr.shape[0] // 2 * 2
    w = arr.shape[1] // 2 * 2
    if h == 0 or w == 0:
        raise ValueError(f"cannot 2x2-pool dims {arr.shape[:2]}; both must be >= 2")
    a = arr[0:h:2, 0:w:2]
    b = arr[0:h:2, 1:w:2]
    c = arr[1:h:2, 0:w:2]
    d = arr[1:h:2, 1:w:2]
    return ((a + b) + (c + d)) * np.float32(0.25)


def combine_corners(v00, v01, v10, v11, wx0, wx1, wy0, wy1):
    """Canonical bilinear combination in float64.

    All samplers and bilinear_tap use this exact association:
    ((v00*w00 + v01*w01) + v10*w10) + v11*w11 with w__ = wy_*wx_.
    Inputs broadcast; corner values are upcast to float64.
    """
    v00 = np.asarray(v00, dtype=np.float64)
    v01 = np.asarray(v01, dtype=np.float64)
    v10 = np.asarray(v10, dtype=np.float64)
    v11 = np.asarray(v11, dtype=np.float64)
    return ((v00 * (wy0 * wx0) + v01 * (wy0 * wx1))
            + v10 * (wy1 * wx0)) + v11 * (wy1 * wx1)


def combine_taps(patch: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Bilinear combination of a corner patch into the full tap window.

    patch: [P, K, K] float32 corner values (K = 2r+2), cell (j, i) holding the
    correlation at target (y0-r+j, x0-r+i); fx, fy: [P] float64 fractional
    parts of the per-level centroid.  Returns [P, K-1, K-1] float32: tap
    (dy, dx) combines patch cells (dy+r .. +1, dx+r .. +1) with the canonical
    association, evaluated in float64 and cast to float32.
    """
    p = patch.astype(np.float64)
    wx1 = fx[:, None, None]
    wx0 = 1.0 - wx1
    wy1 = fy[:, None, None]
    wy0 = 1.0 - wy1
    res = combine_corners(p[:, :-1, :-1], p[:, :-1, 1:], p[:, 1:, :-1], p[:, 1:, 1:],
                          wx0, wx1, wy0, wy1)
    return res.astype(np.float32)
