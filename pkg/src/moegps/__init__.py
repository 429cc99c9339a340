"""Analytical MoE prefill latency model and expert-prediction strategy guide."""

__version__ = "0.1.0"

from .costmodel import LatencyBreakdown
from .domain import (
    ExpertTrace,
    HardwareConfig,
    InvalidInputError,
    ModelConfig,
    TokenDistribution,
    WorkloadConfig,
    distribution_from_skewness,
    sample_trace,
    skewness_of,
)
from .pipeline import SimulationOptions, simulate_layer, simulate_prefill
from .predictors import OverheadCurve, PredictorSpec

__all__ = [
    "ExpertTrace",
    "HardwareConfig",
    "InvalidInputError",
    "LatencyBreakdown",
    "ModelConfig",
    "OverheadCurve",
    "PredictorSpec",
    "SimulationOptions",
    "TokenDistribution",
    "WorkloadConfig",
    "distribution_from_skewness",
    "sample_trace",
    "simulate_layer",
    "simulate_prefill",
    "skewness_of",
]
