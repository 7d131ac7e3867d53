"""Naive reference implementations used as independent oracles by the test suite.

Everything in this file is written as plain loops, directly from the defining
formulas, with no reuse of package code.  Where a package routine promises
bit-exact agreement (float32 dot products accumulated in ascending channel
order, the fixed bilinear combination order), the oracle models the same
arithmetic with scalar numpy float32/float64 operations so comparisons can be
made with ==, not just tolerances.
"""

import math

import numpy as np

F32 = np.float32


# ---------------------------------------------------------------------------
# bilinear sampling
# ---------------------------------------------------------------------------

def naive_bilinear_tap(grid, x, y):
    """Zero-padded bilinear sample of a 2D grid at continuous (x, y).

    Corners are (x0, y0), (x0+1, y0), (x0, y0+1), (x0+1, y0+1) with
    x0 = floor(x); out-of-bounds corners contribute 0.  The combination is
    evaluated in float64 with the fixed association
    ((v00*w00 + v01*w01) + v10*w10) + v11*w11.
    """
    grid = np.asarray(grid)
    h, w = grid.shape
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = float(x) - x0
    fy = float(y) - y0
    wx0, wx1 = 1.0 - fx, fx
    wy0, wy1 = 1.0 - fy, fy

    def cell(yy, xx):
        if 0 <= yy < h and 0 <= xx < w:
            return float(grid[yy, xx])
        return 0.0

    v00 = cell(y0, x0)
    v01 = cell(y0, x0 + 1)
    v10 = cell(y0 + 1, x0)
    v11 = cell(y0 + 1, x0 + 1)
    return ((v00 * (wy0 * wx0) + v01 * (wy0 * wx1)) + v10 * (wy1 * wx0)) + v11 * (wy1 * wx1)


def naive_tap_corners(x, y):
    """Integer corner coordinates and float64 weights of one bilinear tap."""
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = float(x) - x0
    fy = float(y) - y0
    wx0, wx1 = 1.0 - fx, fx
    wy0, wy1 = 1.0 - fy, fy
    return [
        (y0, x0, wy0 * wx0),
        (y0, x0 + 1, wy0 * wx1),
        (y0 + 1, x0, wy1 * wx0),
        (y0 + 1, x0 + 1, wy1 * wx1),
    ]


# ---------------------------------------------------------------------------
# float32 dot products, correlation matrices, pooling
# ---------------------------------------------------------------------------

def naive_dot_f32(a, b):
    """Float32 dot product accumulated one channel at a time, ascending."""
    acc = F32(0.0)
    for d in range(len(a)):
        acc = F32(acc + F32(F32(a[d]) * F32(b[d])))
    return acc


def naive_corr_matrix(f1, f2):
    """All-pairs correlation of two H×W×D feature arrays: [H1*W1, H2*W2] f32."""
    f1 = np.asarray(f1, dtype=np.float32)
    f2 = np.asarray(f2, dtype=np.float32)
    a = f1.reshape(-1, f1.shape[-1])
    b = f2.reshape(-1, f2.shape[-1])
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.float32)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = naive_dot_f32(a[i], b[j])
    return out


def naive_pool2x2(arr):
    """2×2/stride-2 average pooling, floor semantics, ((a+b)+(c+d))*0.25 in f32.

    Works on [H, W] or [H, W, D] float32 arrays (channels pooled independently).
    """
    arr = np.asarray(arr, dtype=np.float32)
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    out_shape = (h2, w2) + arr.shape[2:]
    out = np.zeros(out_shape, dtype=np.float32)
    for y in range(h2):
        for x in range(w2):
            a = arr[2 * y, 2 * x]
            b = arr[2 * y, 2 * x + 1]
            c = arr[2 * y + 1, 2 * x]
            d = arr[2 * y + 1, 2 * x + 1]
            out[y, x] = F32(F32(F32(a + b) + F32(c + d)) * F32(0.25))
    return out


def naive_feature_pyramid(f2, levels):
    """List of L feature arrays: level 0 is the input, each next one pooled."""
    pyr = [np.asarray(f2, dtype=np.float32)]
    for _ in range(levels - 1):
        pyr.append(naive_pool2x2(pyr[-1]))
    return pyr


# ---------------------------------------------------------------------------
# full lookup oracle (direct evaluation of the per-tap definition)
# ---------------------------------------------------------------------------

def naive_lookup(f1, f2, centroids, radius, levels, normalize=False):
    """Per-tap lookup oracle against pooled features.

    f1, f2: [H, W, D] float32; centroids: [H1, W1, 2] float64 (x, y) level-0
    coordinates.  Returns [H1, W1, L, 2r+1, 2r+1] float32, sampled from the
    pooled-feature correlation of each level: every tap corner inside the
    level grid is a fresh float32 dot product; out-of-bounds corners are 0;
    the four corners are combined in float64 with the fixed association, then
    cast to float32.
    """
    f1 = np.asarray(f1, dtype=np.float32)
    pyr = naive_feature_pyramid(f2, levels)
    h1, w1, dims = f1.shape
    k = 2 * radius + 1
    out = np.zeros((h1, w1, levels, k, k), dtype=np.float32)
    scale = F32(1.0 / math.sqrt(dims)) if normalize else None
    for lvl in range(levels):
        g = pyr[lvl]
        th, tw = g.shape[0], g.shape[1]
        for py in range(h1):
            for px in range(w1):
                cx = float(centroids[py, px, 0]) / (2.0 ** lvl)
                cy = float(centroids[py, px, 1]) / (2.0 ** lvl)
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        acc = 0.0
                        corners = naive_tap_corners(cx + dx, cy + dy)
                        vals = []
                        for (yy, xx, wgt) in corners:
                            if 0 <= yy < th and 0 <= xx < tw:
                                vals.append(float(naive_dot_f32(f1[py, px], g[yy, xx])))
                            else:
                                vals.append(0.0)
                        acc = ((vals[0] * corners[0][2] + vals[1] * corners[1][2])
                               + vals[2] * corners[2][2]) + vals[3] * corners[3][2]
                        v = F32(acc)
                        if scale is not None:
                            v = F32(v * scale)
                        out[py, px, lvl, dy + radius, dx + radius] = v
    return out


def naive_ondemand_dot_count(h1, w1, radius, levels, centroid_fields, tgt_shape):
    """Number of length-D dot products a literal per-tap sampler executes.

    One dot per in-bounds tap corner (weight-0 corners included, out-of-bounds
    corners skipped), summed over iterations, levels, pixels, and offsets.
    tgt_shape: (H2, W2) of the level-0 target grid.
    """
    count = 0
    for cents in centroid_fields:
        for lvl in range(levels):
            th, tw = tgt_shape
            for _ in range(lvl):
                th, tw = th // 2, tw // 2
            for py in range(h1):
                for px in range(w1):
                    cx = float(cents[py, px, 0]) / (2.0 ** lvl)
                    cy = float(cents[py, px, 1]) / (2.0 ** lvl)
                    for dy in range(-radius, radius + 1):
                        for dx in range(-radius, radius + 1):
                            for (yy, xx, _w) in naive_tap_corners(cx + dx, cy + dy):
                                if 0 <= yy < th and 0 <= xx < tw:
                                    count += 1
    return count


# ---------------------------------------------------------------------------
# footprints: touched cells and touched blocks
# ---------------------------------------------------------------------------

def naive_touched_cells(centroids, radius, level, tgt_shape):
    """Set of (src_linear, ty, tx) reached with weight > 0 at one level."""
    th, tw = tgt_shape
    for _ in range(level):
        th, tw = th // 2, tw // 2
    h1, w1 = centroids.shape[0], centroids.shape[1]
    touched = set()
    for py in range(h1):
        for px in range(w1):
            cx = float(centroids[py, px, 0]) / (2.0 ** level)
            cy = float(centroids[py, px, 1]) / (2.0 ** level)
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    for (yy, xx, wgt) in naive_tap_corners(cx + dx, cy + dy):
                        if wgt > 0.0 and 0 <= yy < th and 0 <= xx < tw:
                            touched.add((py * w1 + px, yy, xx))
    return touched


def naive_mask_blocks(centroids, radius, level, tgt_shape, block, src_shape):
    """Set of (source_block, target_block) pairs the scatter mask must set.

    Covers target cells at offsets -r..r+1 on each axis around the floor of
    each per-level centroid, clipped to the padded target grid.
    """
    th, tw = tgt_shape
    for _ in range(level):
        th, tw = th // 2, tw // 2
    pth = block * ((th + block - 1) // block)
    ptw = block * ((tw + block - 1) // block)
    h1, w1 = src_shape
    pw1 = block * ((w1 + block - 1) // block)
    tiles_x_src = pw1 // block
    tiles_x_tgt = ptw // block
    bits = set()
    for py in range(h1):
        for px in range(w1):
            sb = (py // block) * tiles_x_src + (px // block)
            cx = float(centroids[py, px, 0]) / (2.0 ** level)
            cy = float(centroids[py, px, 1]) / (2.0 ** level)
            x0 = math.floor(cx)
            y0 = math.floor(cy)
            for b in range(-radius, radius + 2):
                for a in range(-radius, radius + 2):
                    ty, tx = y0 + b, x0 + a
                    if 0 <= ty < pth and 0 <= tx < ptw:
                        tb = (ty // block) * tiles_x_tgt + (tx // block)
                        bits.add((sb, tb))
    return bits


# ---------------------------------------------------------------------------
# patch-major index oracle
# ---------------------------------------------------------------------------

def naive_pm_order(h, w, block):
    """Flattened patch-major visit order of padded (y, x) coordinates.

    Enumerates tiles row-major, then each tile interior row-major; the list
    index of coordinate (y, x) is its patch-major flattened index.
    """
    ph = block * ((h + block - 1) // block)
    pw = block * ((w + block - 1) // block)
    order = []
    for ty in range(ph // block):
        for tx in range(pw // block):
            for iy in range(block):
                for ix in range(block):
                    order.append((ty * block + iy, tx * block + ix))
    return order


# ---------------------------------------------------------------------------
# flow metric oracles
# ---------------------------------------------------------------------------

def naive_epe(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    total = 0.0
    n = 0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            du = pred[y, x, 0] - gt[y, x, 0]
            dv = pred[y, x, 1] - gt[y, x, 1]
            total += math.sqrt(du * du + dv * dv)
            n += 1
    return total / n


def naive_outlier_1px(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    bad = 0
    n = 0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            du = pred[y, x, 0] - gt[y, x, 0]
            dv = pred[y, x, 1] - gt[y, x, 1]
            if math.sqrt(du * du + dv * dv) > 1.0:
                bad += 1
            n += 1
    return 100.0 * bad / n


def naive_large_motion(pred, gt, threshold=128.0):
    """(LM 1px percent, LM EPE) over pixels with ||gt|| > threshold, else None."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    total = 0.0
    bad = 0
    n = 0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            mag = math.sqrt(gt[y, x, 0] ** 2 + gt[y, x, 1] ** 2)
            if mag > threshold:
                du = pred[y, x, 0] - gt[y, x, 0]
                dv = pred[y, x, 1] - gt[y, x, 1]
                e = math.sqrt(du * du + dv * dv)
                total += e
                if e > 1.0:
                    bad += 1
                n += 1
    if n == 0:
        return None
    return 100.0 * bad / n, total / n


def naive_resample_bilinear(arr, out_h, out_w):
    """Edge-clamped bilinear spatial resampling of [H, W, C] float data."""
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[0], arr.shape[1]
    sy = h / out_h
    sx = w / out_w
    out = np.zeros((out_h, out_w) + arr.shape[2:], dtype=np.float64)
    for yo in range(out_h):
        for xo in range(out_w):
            ys = (yo + 0.5) * sy - 0.5
            xs = (xo + 0.5) * sx - 0.5
            y0 = math.floor(ys)
            x0 = math.floor(xs)
            fy = ys - y0
            fx = xs - x0

            def clamp(v, hi):
                return min(max(v, 0), hi - 1)

            v00 = arr[clamp(y0, h), clamp(x0, w)]
            v01 = arr[clamp(y0, h), clamp(x0 + 1, w)]
            v10 = arr[clamp(y0 + 1, h), clamp(x0, w)]
            v11 = arr[clamp(y0 + 1, h), clamp(x0 + 1, w)]
            out[yo, xo] = ((v00 * ((1 - fy) * (1 - fx)) + v01 * ((1 - fy) * fx))
                           + v10 * (fy * (1 - fx))) + v11 * (fy * fx)
    return out
