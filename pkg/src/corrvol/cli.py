"""Command-line interface.

Subcommands
-----------
verify   three-way sampler equivalence on a synthetic scenario (exit 1 on breach)
analyze  block-occupancy study over a corpus of synthetic scenarios
bench    work/memory counters and wall times for all samplers
metrics  flow error metrics between two .flo files

Configuration precedence is flags > environment variables > built-in
defaults.  Recognized variables: CORRVOL_THREADS (worker cap for corpus
analysis), CORRVOL_CACHE_CAP_BYTES (per-level block-cache over-allocation
cap), CORRVOL_BACKEND (auto/python/cython).  Defaults are desk-scale so
every command finishes in seconds; the full-scale operating point the
samplers are designed around (D=256, N=32, r=4, L=4, B=8) is reached by
raising the same flags.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 flow-file
format error, 4 dimension mismatch, 5 infeasible dense oracle.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from ._backend import available_backends
from .analyzer import LAYOUTS, corpus_occupancy, occupancy_csv, record_run
from .flowio import (
    DimensionMismatchError,
    FloFormatError,
    metrics_csv,
    read_flo,
    resample_flow,
)
from .harness import (
    DEFAULT_DENSE_LIMIT_BYTES,
    SAMPLERS,
    bench_csv,
    equivalence_csv,
    gen_scenario,
    run_bench,
    run_equivalence,
)
from .types import LookupSpec

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_FLO_FORMAT = 3
EXIT_DIM_MISMATCH = 4
EXIT_INFEASIBLE = 5


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return value


def _int_list(text: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _env_int(name: str) -> Optional[int]:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"corrvol: {name}={raw!r} is not an integer")


def _resolve_threads(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = _env_int("CORRVOL_THREADS")
    return env if env is not None and env >= 1 else 1


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_geometry_flags(sub: argparse.ArgumentParser, h: int, w: int, d: int,
                        r: int, l: int, n: int) -> None:
    sub.add_argument("--height", type=_positive_int, default=h, help=f"grid height (default {h})")
    sub.add_argument("--width", type=_positive_int, default=w, help=f"grid width (default {w})")
    sub.add_argument("--feature-dim", type=_positive_int, default=d,
                     help=f"feature dimension D (default {d}; full scale 256)")
    sub.add_argument("--radius", type=_nonneg_int, default=r,
                     help=f"lookup radius r (default {r})")
    sub.add_argument("--levels", type=_positive_int, default=l,
                     help=f"pyramid levels L (default {l}; full scale 4)")
    sub.add_argument("--iterations", type=_positive_int, default=n,
                     help=f"update iterations N (default {n}; full scale 32)")


def cmd_verify(args: argparse.Namespace) -> int:
    spec = LookupSpec(radius=args.radius, levels=args.levels)
    scenario = gen_scenario(
        args.seed, (args.height, args.width, args.feature_dim), args.iterations, spec
    )
    try:
        report = run_equivalence(
            scenario,
            args.block,
            tolerance=args.tolerance,
            backend=args.backend,
            dense_limit_bytes=args.dense_limit_bytes,
            cache_cap_bytes=args.cache_cap_bytes,
        )
    except ValueError as exc:
        print(f"corrvol verify: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(
        f"verify {args.height}x{args.width} D={args.feature_dim} r={args.radius} "
        f"L={args.levels} B={args.block} N={args.iterations} seed={args.seed} "
        f"tolerance={args.tolerance:g}"
    )
    for row in report.per_iteration:
        print(
            f"  iter {row['iteration']:3d}: dense/on-demand {row['dev_dense_ondemand']:.3e}  "
            f"dense/sparse {row['dev_dense_sparse']:.3e}  "
            f"on-demand/sparse {row['dev_ondemand_sparse']:.3e}  "
            f"new blocks {row['new_blocks']}"
        )
    print(
        f"  matched-accumulation bitwise: on-demand={'yes' if report.bitwise_ondemand else 'no'} "
        f"sparse={'yes' if report.bitwise_sparse else 'no'}"
    )
    if args.out:
        _emit(equivalence_csv(report), args.out)
    if report.passed:
        print(f"PASS max deviation {report.max_deviation:.3e} <= {args.tolerance:g}")
        return EXIT_OK
    off = report.first_offense
    print(f"FAIL max deviation {report.max_deviation:.3e} > {args.tolerance:g}")
    if off is not None:
        print(
            f"  first offense: iter {off.iteration} {off.sampler} pixel "
            f"({off.pixel_y},{off.pixel_x}) level {off.level} tap ({off.dy:+d},{off.dx:+d}): "
            f"dense {off.dense_value!r} vs {off.other_value!r} (dev {off.deviation:.3e})"
        )
    return EXIT_VERIFY_FAILED


def cmd_analyze(args: argparse.Namespace) -> int:
    spec = LookupSpec(radius=args.radius, levels=args.levels)
    layouts = list(LAYOUTS) if args.layout == "both" else [args.layout]
    seeds = range(args.first_seed, args.first_seed + args.seeds)

    def level0_log(seed: int):
        scenario = gen_scenario(
            seed, (args.height, args.width, args.feature_dim), args.iterations, spec
        )
        return record_run(scenario)[0]

    threads = _resolve_threads(args.threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            logs = list(pool.map(level0_log, seeds))
    else:
        logs = [level0_log(s) for s in seeds]
    reports = corpus_occupancy(logs, args.blocks, layouts)
    _emit(occupancy_csv(reports), args.out)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    spec = LookupSpec(radius=args.radius, levels=args.levels)
    if args.backend == "both":
        backends = list(available_backends())
        if "cython" not in backends:
            print("corrvol bench: cython backend unavailable; python only", file=sys.stderr)
    else:
        backends = [args.backend]
    cache_modes = {"on": (True,), "off": (False,), "both": (True, False)}[args.cache]
    samplers = [s.strip() for s in args.samplers.split(",") if s.strip()]
    for s in samplers:
        if s not in SAMPLERS:
            print(f"corrvol bench: unknown sampler {s!r}", file=sys.stderr)
            return EXIT_USAGE
    records = []
    for size in args.sizes:
        scenario = gen_scenario(
            args.seed, (size, size, args.feature_dim), args.iterations, spec
        )
        for backend in backends:
            records.extend(
                run_bench(
                    scenario,
                    samplers=samplers,
                    block_sizes=args.blocks,
                    cache_modes=cache_modes,
                    backend=backend,
                    dense_limit_bytes=args.dense_limit_bytes,
                    cache_cap_bytes=args.cache_cap_bytes,
                )
            )
    _emit(bench_csv(records), args.out)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        pred = read_flo(args.pred)
        gt = read_flo(args.gt)
    except FloFormatError as exc:
        print(f"corrvol metrics: {exc}", file=sys.stderr)
        return EXIT_FLO_FORMAT
    if args.scale is not None:
        try:
            pred = resample_flow(pred, args.scale)
        except ValueError as exc:
            print(f"corrvol metrics: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        text = metrics_csv(pred, gt)
    except DimensionMismatchError as exc:
        print(f"corrvol metrics: {exc}", file=sys.stderr)
        return EXIT_DIM_MISMATCH
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrvol",
        description="Correlation-volume sampling toolkit: dense, on-demand, and "
        "block-sparse incremental samplers with equivalence checks, occupancy "
        "analysis, benchmarks, and flow metrics.",
    )
    from . import __version__

    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    backends = ("auto",) + tuple(available_backends())

    p = sub.add_parser(
        "verify",
        help="check dense / on-demand / sparse agreement on a synthetic scenario",
        description="Run all three samplers over one synthetic scenario and compare "
        "every cost-map tap.  Exit 0 iff the max relative deviation stays within "
        "tolerance; on failure the first offending tap is printed.  Note: "
        "--tolerance 0 with --block != 1 fails by design — the default dense "
        "sampler pools the volume while the sparse path pools features, a "
        "reassociation worth ~1e-7 relative.",
    )
    _add_geometry_flags(p, h=16, w=16, d=8, r=4, l=2, n=8)
    p.add_argument("--block", type=_positive_int, default=4,
                   help="sparse block size B (default 4; full scale 8)")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="scenario seed (default 0)")
    p.add_argument("--tolerance", type=float, default=1e-5,
                   help="max allowed relative deviation (default 1e-5)")
    p.add_argument("--backend", choices=backends, default=None,
                   help="kernel backend (default: CORRVOL_BACKEND or auto)")
    p.add_argument("--dense-limit-bytes", type=_positive_int, default=DEFAULT_DENSE_LIMIT_BYTES,
                   help="refuse dense oracles above this estimate (exit 5)")
    p.add_argument("--cache-cap-bytes", type=_positive_int, default=None,
                   help="sparse block-cache over-allocation cap per level "
                   "(default: CORRVOL_CACHE_CAP_BYTES or 5 GiB)")
    p.add_argument("--out", default=None, help="also write the per-iteration CSV here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "analyze",
        help="block-occupancy study over a corpus of synthetic scenarios",
        description="Generate a corpus of scenarios, record every correlation cell "
        "touched with nonzero bilinear weight at level 0, and report the percentage "
        "of occupied B^2 x B^2 blocks under row-major and patch-major layouts.",
    )
    _add_geometry_flags(p, h=64, w=64, d=8, r=4, l=4, n=16)
    p.add_argument("--seeds", type=_positive_int, default=20,
                   help="number of corpus scenarios (default 20)")
    p.add_argument("--first-seed", type=_nonneg_int, default=0,
                   help="first scenario seed (default 0)")
    p.add_argument("--blocks", type=_int_list, default=[1, 2, 4, 8, 16],
                   help="comma-separated block sizes (default 1,2,4,8,16)")
    p.add_argument("--layout", choices=("both",) + LAYOUTS, default="both",
                   help="layouts to analyze (default both)")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker cap for the corpus loop (default: CORRVOL_THREADS or 1)")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser(
        "bench",
        help="work/memory counters and wall times for the samplers",
        description="Run each requested sampler over square scenarios of the given "
        "sizes and emit one CSV row per run: executed dot-product/MAC counters, "
        "block counters, analytic peak bytes, wall time, and the sparse pipeline's "
        "per-step time shares.  Counters are deterministic; wall_ms is not.  The "
        "benchmark loop is intentionally sequential so wall times stay honest.",
    )
    p.add_argument("--sizes", type=_int_list, default=[16, 32, 64],
                   help="comma-separated square grid sizes (default 16,32,64)")
    p.add_argument("--feature-dim", type=_positive_int, default=8,
                   help="feature dimension D (default 8; full scale 256)")
    p.add_argument("--radius", type=_nonneg_int, default=4, help="lookup radius r (default 4)")
    p.add_argument("--levels", type=_positive_int, default=2,
                   help="pyramid levels L (default 2; full scale 4)")
    p.add_argument("--iterations", type=_positive_int, default=16,
                   help="update iterations N (default 16; full scale 32)")
    p.add_argument("--blocks", type=_int_list, default=[4],
                   help="sparse block sizes B (default 4; full scale 8)")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="scenario seed (default 0)")
    p.add_argument("--samplers", default=",".join(SAMPLERS),
                   help=f"comma-separated sampler set (default {','.join(SAMPLERS)})")
    p.add_argument("--cache", choices=("on", "off", "both"), default="on",
                   help="sparse block-cache mode (default on)")
    p.add_argument("--backend", choices=backends + ("both",), default=None,
                   help="kernel backend; 'both' benches every available lane")
    p.add_argument("--dense-limit-bytes", type=_positive_int, default=DEFAULT_DENSE_LIMIT_BYTES,
                   help="flag dense runs above this estimate as OOM rows")
    p.add_argument("--cache-cap-bytes", type=_positive_int, default=None,
                   help="sparse block-cache over-allocation cap per level "
                   "(default: CORRVOL_CACHE_CAP_BYTES or 5 GiB)")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "metrics",
        help="flow error metrics between a prediction and a ground-truth .flo",
        description="Read two .flo files and emit EPE, 1px outlier rate, and the "
        "large-motion (ground-truth magnitude > 128px) variants as CSV.  "
        "--scale resamples the prediction first (e.g. 2 upscales a half-resolution "
        "output to ground-truth dims, scaling magnitudes accordingly).",
    )
    p.add_argument("pred", help="predicted flow (.flo)")
    p.add_argument("gt", help="ground-truth flow (.flo)")
    p.add_argument("--scale", type=float, default=None,
                   help="resample the prediction by this factor before comparing")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
