"""Kernel-lane selection: compiled extension when available, numpy fallback.

The active lane is chosen at import time: the compiled extension if it loads,
otherwise the pure-numpy lane.  CORRVOL_BACKEND=python|cython|auto overrides;
sampler entry points also accept a per-call ``backend`` argument (used by the
lane-comparison benchmark).  Both lanes are bit-identical, so lane choice
never changes results, only speed.
"""

from __future__ import annotations

import os
import types
from typing import Optional

from . import _pykernels

try:
    from . import _ckernels

    HAVE_CYTHON = True
except ImportError:
    _ckernels = None
    HAVE_CYTHON = False

_SHARED = ("pool2x2", "combine_corners", "combine_taps")
_COMPILED = ("corr_pairs", "corr_gather", "block_mmm")


def _make_lane(name: str, dots_module) -> types.SimpleNamespace:
    lane = types.SimpleNamespace(name=name)
    for fn in _COMPILED:
        setattr(lane, fn, getattr(dots_module, fn))
    for fn in _SHARED:
        setattr(lane, fn, getattr(_pykernels, fn))
    return lane


_PY_LANE = _make_lane("python", _pykernels)
_CY_LANE = _make_lane("cython", _ckernels) if HAVE_CYTHON else None


def available_backends() -> list:
    return ["python", "cython"] if HAVE_CYTHON else ["python"]


def default_backend() -> str:
    """Resolve the import-time default, honoring CORRVOL_BACKEND."""
    env = os.environ.get("CORRVOL_BACKEND", "auto").strip().lower()
    if env in ("", "auto"):
        return "cython" if HAVE_CYTHON else "python"
    if env not in ("python", "cython"):
        raise ValueError(f"CORRVOL_BACKEND must be auto, python, or cython; got {env!r}")
    if env == "cython" and not HAVE_CYTHON:
        raise RuntimeError("CORRVOL_BACKEND=cython but the compiled extension is not available")
    return env


def get_kernels(backend: Optional[str] = None) -> types.SimpleNamespace:
    """Kernel namespace for a lane; backend None/'auto' uses the default."""
    if backend is None or backend == "auto":
        backend = default_backend()
    if backend == "python":
        return _PY_LANE
    if backend == "cython":
        if _CY_LANE is None:
            raise RuntimeError("compiled kernel lane requested but the extension is not built")
        return _CY_LANE
    raise ValueError(f"unknown backend {backend!r}")
