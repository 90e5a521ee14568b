"""Streaming test-time adaptation over precomputed embedding streams.

Committee-consistency reweighting guards a per-class feature cache against
confidently-wrong samples; residual learning with a three-term objective
evolves the class text embeddings online; predictions fuse the cache-aware
classifier with the evolved-mean head.
"""

from .config import RunConfig, load_config
from .datagen import SyntheticSpec, generate_benchmark
from .pipeline import (
    AdaptationState,
    RunMetrics,
    SampleRecord,
    SampleResult,
    adapt_sample,
    expected_calibration_error,
    initialize_state,
    run_stream,
)

__all__ = [
    "AdaptationState",
    "RunConfig",
    "RunMetrics",
    "SampleRecord",
    "SampleResult",
    "SyntheticSpec",
    "adapt_sample",
    "expected_calibration_error",
    "generate_benchmark",
    "initialize_state",
    "load_config",
    "run_stream",
]

__version__ = "0.1.0"
