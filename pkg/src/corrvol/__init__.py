"""Correlation-volume sampling toolkit for iterative optical-flow estimators.

Three interchangeable samplers produce identical per-pixel cost maps from a
pair of feature maps and a sequence of per-pixel lookup centroids:

* dense — materialize the all-pairs correlation volume pyramid once, then
  bilinearly sample it (the memory-heavy baseline);
* on-demand — recompute every tap's feature dot products at lookup time
  (the compute-heavy, memory-light baseline);
* sparse — compute only the B^2 x B^2 tile-pair blocks the current lookups
  can touch, cache them across update iterations, and gather from the cache.

A shared-arithmetic kernel design (float32 storage, fixed-order channel
accumulation, one canonical bilinear combination) makes the sparse and
on-demand samplers agree with the matched dense build bit for bit, with a
compiled extension and a pure-numpy fallback selected at import time.

Supporting modules: access-pattern/occupancy analysis, synthetic scenario
harness with equivalence checks and benchmarks, .flo flow-file I/O with
evaluation metrics, and a CLI (``corrvol``).
"""

from ._backend import available_backends, default_backend
from .analyzer import (
    LAYOUTS,
    OccupancyReport,
    block_counts,
    corpus_occupancy,
    occupancy,
    occupancy_csv,
    record_run,
)
from .dense import (
    DenseCorrelationVolume,
    build_dense_volume,
    build_feature_pyramid,
    build_volume_pyramid,
    estimate_dense_bytes,
    lookup_dense,
    pooled_dims,
)
from .flowio import (
    CASCADE_MIN_DIMENSION,
    LARGE_MOTION_THRESHOLD,
    FloFormatError,
    FloHeaderError,
    FloMagicError,
    FloNonFiniteError,
    FloTruncatedError,
    cascaded_init,
    epe,
    large_motion_metrics,
    metrics_csv,
    outlier_1px,
    read_flo,
    resample_flow,
    write_flo,
)
from .harness import (
    BenchRecord,
    EquivalenceReport,
    SyntheticScenario,
    bench_csv,
    equivalence_csv,
    gen_scenario,
    run_bench,
    run_equivalence,
)
from .layout import PatchMajorFeatures, from_patch_major, pm_index, to_patch_major
from .ondemand import count_work_on_demand, lookup_on_demand
from .sparse import (
    BlockStore,
    SparseVolumeState,
    compute_block_indices,
    gather_proxy,
    init_state,
    memory_footprint,
    sample_iteration,
    sampled_block_mmm,
    set_computation_mask,
)
from .types import (
    AccessLog,
    CacheLimitError,
    CentroidField,
    CorrvolError,
    CostMaps,
    DimensionMismatchError,
    FeatureMap,
    FeaturePyramid,
    FlowField,
    GatherMissError,
    LookupSpec,
    WorkCounter,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # types
    "FeatureMap",
    "FeaturePyramid",
    "CentroidField",
    "LookupSpec",
    "CostMaps",
    "FlowField",
    "AccessLog",
    "WorkCounter",
    "CorrvolError",
    "GatherMissError",
    "CacheLimitError",
    "DimensionMismatchError",
    # backends
    "available_backends",
    "default_backend",
    # layout
    "PatchMajorFeatures",
    "pm_index",
    "to_patch_major",
    "from_patch_major",
    # dense
    "DenseCorrelationVolume",
    "build_dense_volume",
    "build_volume_pyramid",
    "build_feature_pyramid",
    "pooled_dims",
    "estimate_dense_bytes",
    "lookup_dense",
    # on-demand
    "lookup_on_demand",
    "count_work_on_demand",
    # sparse
    "SparseVolumeState",
    "BlockStore",
    "init_state",
    "set_computation_mask",
    "compute_block_indices",
    "sampled_block_mmm",
    "gather_proxy",
    "sample_iteration",
    "memory_footprint",
    # analyzer
    "LAYOUTS",
    "record_run",
    "occupancy",
    "block_counts",
    "OccupancyReport",
    "corpus_occupancy",
    "occupancy_csv",
    # harness
    "SyntheticScenario",
    "gen_scenario",
    "EquivalenceReport",
    "run_equivalence",
    "equivalence_csv",
    "BenchRecord",
    "run_bench",
    "bench_csv",
    # flow I/O and metrics
    "read_flo",
    "write_flo",
    "FloFormatError",
    "FloMagicError",
    "FloTruncatedError",
    "FloHeaderError",
    "FloNonFiniteError",
    "epe",
    "outlier_1px",
    "large_motion_metrics",
    "LARGE_MOTION_THRESHOLD",
    "CASCADE_MIN_DIMENSION",
    "resample_flow",
    "cascaded_init",
    "metrics_csv",
]
