"""Synthetic iteration driver, three-way equivalence checker, benchmark runner.

Scenarios stand in for the centroid traces a trained recurrent flow estimator
would produce: a Gaussian-smoothed random flow field is approached over N
iterations through a monotone drift schedule (w_0 = 0, w_{N-1} = 1) with
small per-iteration noise, so lookups start at the zero-flow positions and
converge smoothly — the geometric structure the block-sparse sampler
exploits.  All counters are derived from executed work and are bit-stable
across runs with one seed; wall-clock times are reported but never used as
acceptance currency.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .dense import (
    build_feature_pyramid,
    build_volume_pyramid,
    estimate_dense_bytes,
    lookup_dense,
    pooled_dims,
)
from .ondemand import lookup_on_demand
from .sparse import init_state, memory_footprint, sample_iteration
from .types import CentroidField, CostMaps, FeatureMap, FlowField, LookupSpec, WorkCounter

#: Dense volumes above this estimate are refused / flagged instead of built.
DEFAULT_DENSE_LIMIT_BYTES = 2 * 2 ** 30

SAMPLERS = ("dense", "ondemand", "sparse")


@dataclass
class SyntheticScenario:
    """Reproducible features + ground-truth flow + centroid sequence."""

    seed: int
    height: int
    width: int
    feature_dim: int
    spec: LookupSpec
    iterations: int
    f1: FeatureMap
    f2: FeatureMap
    flow_gt: FlowField
    centroid_fields: List[CentroidField]
    max_magnitude: float
    noise: float
    smooth_sigma: float

    @property
    def tgt_height(self) -> int:
        return self.height

    @property
    def tgt_width(self) -> int:
        return self.width


def gen_scenario(
    seed: int,
    dims: Tuple[int, int, int],
    iterations: int,
    spec: LookupSpec,
    max_magnitude: Optional[float] = None,
    noise: float = 0.25,
    smooth_sigma: Optional[float] = None,
) -> SyntheticScenario:
    """Generate a deterministic synthetic scenario.

    dims: (H, W, D).  The iteration-i centroid of pixel (y, x) is
    (x, y) + w_i * flow_gt(y, x) + noise_i with w_i = i/(N-1) (w_0 = 0 and no
    noise on the first iteration, matching a zero-flow initialization).  The
    draw order (features, flow, per-iteration noise) is fixed, so one seed
    yields bit-identical scenarios forever.
    """
    h, w, d = dims
    if h < 1 or w < 1 or d < 1:
        raise ValueError(f"invalid dims {dims}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if max_magnitude is None:
        max_magnitude = min(h, w) / 4.0
    if smooth_sigma is None:
        smooth_sigma = max(1.0, min(h, w) / 8.0)
    rng = np.random.default_rng(seed)
    f1 = FeatureMap(values=rng.standard_normal((h, w, d)).astype(np.float32))
    f2 = FeatureMap(values=rng.standard_normal((h, w, d)).astype(np.float32))
    raw = rng.standard_normal((h, w, 2))
    smooth = np.stack(
        [gaussian_filter(raw[..., c], sigma=smooth_sigma) for c in range(2)], axis=-1
    )
    mag = np.sqrt((smooth ** 2).sum(axis=-1)).max()
    if mag > 0:
        smooth = smooth * (max_magnitude / mag)
    flow_gt = FlowField(vectors=smooth.astype(np.float32))
    ys, xs = np.mgrid[0:h, 0:w]
    base = np.stack([xs, ys], axis=-1).astype(np.float64)
    flow64 = flow_gt.vectors.astype(np.float64)
    fields = []
    for i in range(iterations):
        wgt = 0.0 if iterations == 1 else i / (iterations - 1)
        coords = base + wgt * flow64
        if i > 0 and noise > 0:
            coords = coords + rng.normal(0.0, noise, size=(h, w, 2))
        fields.append(CentroidField(coords=coords))
    return SyntheticScenario(
        seed=seed,
        height=h,
        width=w,
        feature_dim=d,
        spec=spec,
        iterations=iterations,
        f1=f1,
        f2=f2,
        flow_gt=flow_gt,
        centroid_fields=fields,
        max_magnitude=float(max_magnitude),
        noise=float(noise),
        smooth_sigma=float(smooth_sigma),
    )


@dataclass
class TapDeviation:
    """Location and values of the worst offending tap of a failed check."""

    iteration: int
    sampler: str
    pixel_y: int
    pixel_x: int
    level: int
    dy: int
    dx: int
    dense_value: float
    other_value: float
    deviation: float


@dataclass
class EquivalenceReport:
    """Per-iteration deviations of on-demand and sparse outputs vs dense.

    Deviations are max|a - b| / (1 + max|dense|), measured against the
    default (volume-pooled) dense sampler.  The bitwise flags compare against
    the matched-accumulation dense build (pooled features), whose arithmetic
    the other samplers share exactly.
    """

    block: int
    tolerance: float
    iterations: int
    per_iteration: List[Dict]
    max_deviation: float
    bitwise_ondemand: bool
    bitwise_sparse: bool
    passed: bool
    first_offense: Optional[TapDeviation]


def _deviation(a: CostMaps, b: CostMaps, denom: float) -> float:
    return float(np.abs(a.values - b.values).max()) / denom


def _locate_worst(
    it: int, sampler: str, dense: CostMaps, other: CostMaps, denom: float, radius: int
) -> TapDeviation:
    diff = np.abs(other.values - dense.values)
    iy, ix, lvl, jy, jx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return TapDeviation(
        iteration=it,
        sampler=sampler,
        pixel_y=int(iy),
        pixel_x=int(ix),
        level=int(lvl),
        dy=int(jy) - radius,
        dx=int(jx) - radius,
        dense_value=float(dense.values[iy, ix, lvl, jy, jx]),
        other_value=float(other.values[iy, ix, lvl, jy, jx]),
        deviation=float(diff[iy, ix, lvl, jy, jx]) / denom,
    )


def run_equivalence(
    scenario: SyntheticScenario,
    block: int,
    tolerance: float = 1e-5,
    backend: Optional[str] = None,
    dense_limit_bytes: int = DEFAULT_DENSE_LIMIT_BYTES,
    cache_cap_bytes: Optional[int] = None,
) -> EquivalenceReport:
    """Run all three samplers over a scenario and compare every tap.

    Fails (passed=False, first_offense set) as soon as any iteration's
    deviation exceeds the tolerance.  At B=1 the sparse path agrees with the
    matched-accumulation dense build bitwise; at larger B the default dense
    build still matches within rounding of its volume-vs-feature pooling
    reassociation (~1e-7 relative), far inside the 1e-5 default tolerance.
    """
    spec = scenario.spec
    est = estimate_dense_bytes(
        (scenario.height, scenario.width), (scenario.tgt_height, scenario.tgt_width), spec.levels
    )
    if est > dense_limit_bytes:
        raise ValueError(
            f"dense oracle would need {est} bytes (> limit {dense_limit_bytes}); "
            "shrink dims or raise dense_limit_bytes"
        )
    vol_default = build_volume_pyramid(
        scenario.f1, scenario.f2, spec.levels, mode="pool_volume", backend=backend
    )
    vol_matched = build_volume_pyramid(
        scenario.f1, scenario.f2, spec.levels, mode="pool_features", backend=backend
    )
    pyr = build_feature_pyramid(scenario.f2, spec.levels)
    state = init_state(
        scenario.f1, scenario.f2, spec, block, cache_cap_bytes=cache_cap_bytes, backend=backend
    )
    rows = []
    max_dev = 0.0
    bitwise_od = True
    bitwise_sp = True
    first: Optional[TapDeviation] = None
    prev_blocks = 0
    for it, cents in enumerate(scenario.centroid_fields):
        cd = lookup_dense(vol_default, cents, spec)
        cm = lookup_dense(vol_matched, cents, spec)
        co = lookup_on_demand(scenario.f1, pyr, cents, spec, backend=backend)
        cs = sample_iteration(state, cents)
        denom = 1.0 + float(np.abs(cd.values).max())
        d_do = _deviation(co, cd, denom)
        d_ds = _deviation(cs, cd, denom)
        d_os = _deviation(cs, co, denom)
        bit_od = bool(np.array_equal(co.values, cm.values))
        bit_sp = bool(np.array_equal(cs.values, cm.values))
        bitwise_od &= bit_od
        bitwise_sp &= bit_sp
        new_blocks = state.counter.blocks_computed - prev_blocks
        prev_blocks = state.counter.blocks_computed
        it_max = max(d_do, d_ds, d_os)
        max_dev = max(max_dev, it_max)
        rows.append(
            {
                "iteration": it,
                "dev_dense_ondemand": d_do,
                "dev_dense_sparse": d_ds,
                "dev_ondemand_sparse": d_os,
                "bitwise_ondemand": bit_od,
                "bitwise_sparse": bit_sp,
                "new_blocks": new_blocks,
            }
        )
        if it_max > tolerance and first is None:
            if d_ds >= d_do:
                first = _locate_worst(it, "sparse", cd, cs, denom, spec.radius)
            else:
                first = _locate_worst(it, "ondemand", cd, co, denom, spec.radius)
    return EquivalenceReport(
        block=block,
        tolerance=tolerance,
        iterations=scenario.iterations,
        per_iteration=rows,
        max_deviation=max_dev,
        bitwise_ondemand=bitwise_od,
        bitwise_sparse=bitwise_sp,
        passed=max_dev <= tolerance,
        first_offense=first,
    )


@dataclass
class BenchRecord:
    """One benchmark row: deterministic work/memory counters plus wall time."""

    sampler: str
    backend: str
    height: int
    width: int
    feature_dim: int
    radius: int
    levels: int
    block: int
    iterations: int
    cache: str
    seed: int
    dot_products: int
    macs: int
    blocks_computed: int
    blocks_stored: int
    blocks_union: int
    block_positions: int
    peak_bytes: int
    wall_ms: float
    shares: Optional[Dict[str, float]]
    oom: bool


def _bench_dense(scenario: SyntheticScenario, backend: str, dense_limit_bytes: int) -> BenchRecord:
    spec = scenario.spec
    src = (scenario.height, scenario.width)
    est = estimate_dense_bytes(src, src, spec.levels)
    positions = sum(
        (src[0] * src[1]) * (pooled_dims(src, lvl)[0] * pooled_dims(src, lvl)[1])
        for lvl in range(spec.levels)
    )
    common = dict(
        sampler="dense",
        backend=backend,
        height=scenario.height,
        width=scenario.width,
        feature_dim=scenario.feature_dim,
        radius=spec.radius,
        levels=spec.levels,
        block=1,
        iterations=scenario.iterations,
        cache="",
        seed=scenario.seed,
        blocks_computed=0,
        blocks_stored=0,
        blocks_union=0,
        block_positions=positions,
        shares=None,
    )
    if est > dense_limit_bytes:
        return BenchRecord(
            dot_products=0, macs=0, peak_bytes=est, wall_ms=0.0, oom=True, **common
        )
    counter = WorkCounter()
    t0 = time.perf_counter()
    vol = build_volume_pyramid(
        scenario.f1, scenario.f2, spec.levels, mode="pool_features",
        backend=backend, counter=counter,
    )
    for cents in scenario.centroid_fields:
        lookup_dense(vol, cents, spec)
    wall = (time.perf_counter() - t0) * 1000.0
    peak = vol.nbytes() + scenario.f1.values.nbytes + scenario.f2.values.nbytes
    return BenchRecord(
        dot_products=counter.dot_products,
        macs=counter.macs,
        peak_bytes=peak,
        wall_ms=wall,
        oom=False,
        **common,
    )


def _bench_ondemand(scenario: SyntheticScenario, backend: str) -> BenchRecord:
    spec = scenario.spec
    counter = WorkCounter()
    t0 = time.perf_counter()
    pyr = build_feature_pyramid(scenario.f2, spec.levels)
    for cents in scenario.centroid_fields:
        lookup_on_demand(scenario.f1, pyr, cents, spec, backend=backend, counter=counter)
    wall = (time.perf_counter() - t0) * 1000.0
    peak = scenario.f1.values.nbytes + sum(f.values.nbytes for f in pyr.levels)
    return BenchRecord(
        sampler="ondemand",
        backend=backend,
        height=scenario.height,
        width=scenario.width,
        feature_dim=scenario.feature_dim,
        radius=spec.radius,
        levels=spec.levels,
        block=1,
        iterations=scenario.iterations,
        cache="",
        seed=scenario.seed,
        dot_products=counter.dot_products,
        macs=counter.macs,
        blocks_computed=0,
        blocks_stored=0,
        blocks_union=0,
        block_positions=0,
        peak_bytes=peak,
        wall_ms=wall,
        shares=None,
        oom=False,
    )


def _bench_sparse(
    scenario: SyntheticScenario,
    block: int,
    cache_enabled: bool,
    backend: str,
    cache_cap_bytes: Optional[int] = None,
) -> BenchRecord:
    spec = scenario.spec
    t0 = time.perf_counter()
    state = init_state(
        scenario.f1,
        scenario.f2,
        spec,
        block,
        cache_cap_bytes=cache_cap_bytes,
        cache_enabled=cache_enabled,
        backend=backend,
    )
    peak = memory_footprint(state)["total_bytes"]
    for cents in scenario.centroid_fields:
        sample_iteration(state, cents)
        peak = max(peak, memory_footprint(state)["total_bytes"])
    wall = (time.perf_counter() - t0) * 1000.0
    total_t = sum(state.timings.values())
    shares = (
        {step: 100.0 * t / total_t for step, t in state.timings.items()} if total_t > 0 else None
    )
    return BenchRecord(
        sampler="sparse",
        backend=backend,
        height=scenario.height,
        width=scenario.width,
        feature_dim=scenario.feature_dim,
        radius=spec.radius,
        levels=spec.levels,
        block=block,
        iterations=scenario.iterations,
        cache="on" if cache_enabled else "off",
        seed=scenario.seed,
        dot_products=state.counter.dot_products,
        macs=state.counter.macs,
        blocks_computed=state.counter.blocks_computed,
        blocks_stored=sum(lv.store.used for lv in state.levels),
        blocks_union=sum(int(lv.mask_union.sum()) for lv in state.levels),
        block_positions=sum(lv.block_positions for lv in state.levels),
        peak_bytes=peak,
        wall_ms=wall,
        shares=shares,
        oom=False,
    )


def run_bench(
    scenario: SyntheticScenario,
    samplers: Sequence[str] = SAMPLERS,
    block_sizes: Sequence[int] = (4,),
    cache_modes: Sequence[bool] = (True,),
    backend: Optional[str] = None,
    dense_limit_bytes: int = DEFAULT_DENSE_LIMIT_BYTES,
    cache_cap_bytes: Optional[int] = None,
) -> List[BenchRecord]:
    """Benchmark the requested samplers on one scenario.

    dense and ondemand each contribute one row (block size does not apply to
    them); sparse contributes one row per (block size, cache mode).  Records
    are deterministic in every field except wall_ms.
    """
    from ._backend import get_kernels

    backend_name = get_kernels(backend).name
    records = []
    for sampler in samplers:
        if sampler == "dense":
            records.append(_bench_dense(scenario, backend_name, dense_limit_bytes))
        elif sampler == "ondemand":
            records.append(_bench_ondemand(scenario, backend_name))
        elif sampler == "sparse":
            for b in block_sizes:
                for cache in cache_modes:
                    records.append(
                        _bench_sparse(scenario, b, cache, backend_name, cache_cap_bytes)
                    )
        else:
            raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    return records


VERIFY_CSV_SCHEMA = "# corrvol-verify-csv v1"


def equivalence_csv(report: EquivalenceReport) -> str:
    """Per-iteration deviation rows of an equivalence run as CSV."""
    lines = [
        VERIFY_CSV_SCHEMA,
        "iteration,dev_dense_ondemand,dev_dense_sparse,dev_ondemand_sparse,"
        "bitwise_ondemand,bitwise_sparse,new_blocks",
    ]
    for row in report.per_iteration:
        lines.append(
            f"{row['iteration']},{row['dev_dense_ondemand']:.6e},"
            f"{row['dev_dense_sparse']:.6e},{row['dev_ondemand_sparse']:.6e},"
            f"{1 if row['bitwise_ondemand'] else 0},"
            f"{1 if row['bitwise_sparse'] else 0},{row['new_blocks']}"
        )
    return "\n".join(lines) + "\n"


BENCH_CSV_SCHEMA = "# corrvol-bench-csv v1"

_BENCH_COLUMNS = (
    "sampler,backend,height,width,feature_dim,radius,levels,block,iterations,cache,seed,"
    "dot_products,macs,blocks_computed,blocks_stored,blocks_union,block_positions,"
    "peak_bytes,wall_ms,share_mask,share_indices,share_mmm,share_cache,share_sampling,oom"
)


def bench_csv(records: Sequence[BenchRecord]) -> str:
    lines = [BENCH_CSV_SCHEMA, _BENCH_COLUMNS]
    for r in records:
        if r.shares is None:
            share_cols = ["", "", "", "", ""]
        else:
            share_cols = [
                f"{r.shares[s]:.4f}" for s in ("mask", "indices", "mmm", "cache", "sampling")
            ]
        lines.append(
            ",".join(
                [
                    r.sampler,
                    r.backend,
                    str(r.height),
                    str(r.width),
                    str(r.feature_dim),
                    str(r.radius),
                    str(r.levels),
                    str(r.block),
                    str(r.iterations),
                    r.cache,
                    str(r.seed),
                    str(r.dot_products),
                    str(r.macs),
                    str(r.blocks_computed),
                    str(r.blocks_stored),
                    str(r.blocks_union),
                    str(r.block_positions),
                    str(r.peak_bytes),
                    f"{r.wall_ms:.3f}",
                ]
                + share_cols
                + ["1" if r.oom else "0"]
            )
        )
    return "\n".join(lines) + "\n"
