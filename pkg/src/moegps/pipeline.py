"""End-to-end MoE layer latency per prediction strategy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .costmodel import (
    LatencyBreakdown,
    attention_time,
    expert_transfer_time,
    ffn_time,
    ring_allreduce_time,
    scatter_time,
)
from .domain import HardwareConfig, InvalidInputError, ModelConfig, WorkloadConfig
from .errormodel import bottleneck_tokens, comm_error_penalty
from .predictors import OverheadCurve, PredictorSpec, overhead_fraction


@dataclass(frozen=True)
class SimulationOptions:
    attention_epsilon: float = 0.0  # s per token for element-wise/softmax work
    placement_interval: int = 1  # batches sharing one prediction + placement
    experts_moved: int = 1  # expert weight sets received per GPU per layer
    two_matrix_transfer: bool = False
    dist_only_balanced_gather: bool = False

    def __post_init__(self):
        if self.placement_interval < 1:
            raise InvalidInputError("placement_interval must be >= 1")
        if self.experts_moved < 0 or self.attention_epsilon < 0:
            raise InvalidInputError("experts_moved and attention_epsilon must be >= 0")


DEFAULT_OPTIONS = SimulationOptions()


def placement_residual(model: ModelConfig, hw: HardwareConfig, attention: float, options: SimulationOptions = DEFAULT_OPTIONS) -> float:
    """Expert-copy time left over once it overlaps with attention."""
    xfer = expert_transfer_time(model, hw, options.experts_moved, options.two_matrix_transfer)
    return max(0.0, xfer - attention)


def simulate_layer(
    strategy: PredictorSpec,
    model: ModelConfig,
    workload: WorkloadConfig,
    hw: HardwareConfig,
    curve: Optional[OverheadCurve] = None,
    options: SimulationOptions = DEFAULT_OPTIONS,
) -> LatencyBreakdown:
    """Latency of one prefill layer: TP attention, ring all-reduce, expert dispatch, FFN, combine."""
    workload.check_against(model)
    G = hw.gpu_count
    s = workload.effective_skewness()
    attn = attention_time(model, workload, hw, options.attention_epsilon)
    token_bytes = workload.tokens * model.hidden_dim * model.bytes_per_param
    allreduce = ring_allreduce_time(token_bytes, hw)
    routed_bytes = token_bytes * model.top_k
    avg = workload.tokens * model.top_k / G
    skewed_comm = scatter_time(routed_bytes, s, hw)
    balanced_comm = scatter_time(routed_bytes, 1.0, hw)

    if strategy.kind == "none":
        return LatencyBreakdown(attn, allreduce, skewed_comm, ffn_time(s * avg, model, hw), skewed_comm)

    residual = placement_residual(model, hw, attn, options) / options.placement_interval
    eps = strategy.epsilon
    ffn = ffn_time(bottleneck_tokens(avg, eps, strategy.error_scenario, G), model, hw)

    if strategy.kind == "distribution_only":
        gather = balanced_comm if options.dist_only_balanced_gather else skewed_comm
        return LatencyBreakdown(attn, allreduce, skewed_comm, ffn, gather, 0.0, residual)

    if curve is None:
        raise InvalidInputError("token_to_expert needs an overhead curve")
    scatter = comm_error_penalty(eps, balanced_comm)
    base = LatencyBreakdown(attn, allreduce, scatter, ffn, balanced_comm, 0.0, residual)
    overhead = overhead_fraction(curve, strategy.accuracy, s) * base.total / options.placement_interval
    return base.replace(prediction_overhead=overhead)


def simulate_prefill(
    strategy: PredictorSpec,
    model: ModelConfig,
    workload: WorkloadConfig,
    hw: HardwareConfig,
    curve: Optional[OverheadCurve] = None,
    options: SimulationOptions = DEFAULT_OPTIONS,
) -> LatencyBreakdown:
    """All ``model.num_layers`` layers, assumed identical."""
    return simulate_layer(strategy, model, workload, hw, curve, options).scaled(model.num_layers)
