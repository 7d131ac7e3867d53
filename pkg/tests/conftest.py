"""Shared test configuration: deterministic hypothesis profile, oracle imports."""

import os
import sys

import hypothesis

# Property tests must be reproducible in CI: fixed example order, no timing
# flakiness from the deadline heuristic.
hypothesis.settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=25,
)
hypothesis.settings.load_profile("deterministic")

# Make tests/oracles.py importable regardless of how pytest was invoked.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
