"""Roofline latency primitives for attention, expert FFNs and collectives.

All times are in seconds, all sizes in bytes unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .domain import HardwareConfig, InvalidInputError, ModelConfig, WorkloadConfig

COMPONENTS = ("attention", "allreduce", "scatter", "ffn", "gather", "prediction_overhead", "placement_residual")


@dataclass(frozen=True)
class LatencyBreakdown:
    attention: float = 0.0
    allreduce: float = 0.0
    scatter: float = 0.0
    ffn: float = 0.0
    gather: float = 0.0
    prediction_overhead: float = 0.0
    placement_residual: float = 0.0

    def __post_init__(self):
        for name in COMPONENTS:
            if getattr(self, name) < 0:
                raise InvalidInputError(f"latency component {name} is negative")

    @property
    def total(self) -> float:
        return math.fsum(getattr(self, name) for name in COMPONENTS)

    @property
    def communication(self) -> float:
        return self.allreduce + self.scatter + self.gather

    def scaled(self, factor: float) -> "LatencyBreakdown":
        return LatencyBreakdown(**{name: getattr(self, name) * factor for name in COMPONENTS})

    def shares(self) -> dict:
        t = self.total
        return {name: (getattr(self, name) / t if t else 0.0) for name in COMPONENTS}

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d

    def replace(self, **changes) -> "LatencyBreakdown":
        return replace(self, **changes)


def roofline_time(flops: float, bytes_moved: float, hw: HardwareConfig) -> float:
    return max(flops / hw.effective_flops, bytes_moved / hw.mem_bandwidth)


def _gemm(m: float, n: float, k: float, hw: HardwareConfig, bytes_per_param: int) -> float:
    if m <= 0:
        return 0.0
    flops = 2.0 * m * n * k
    bytes_moved = (m * k + k * n + m * n) * bytes_per_param
    return roofline_time(flops, bytes_moved, hw)


def gemm_time(m: int, n: int, k: int, hw: HardwareConfig, bytes_per_param: int = 2) -> float:
    """Roofline time of an (m x k) @ (k x n) GEMM."""
    if min(m, n, k) < 1:
        raise InvalidInputError("GEMM dimensions must be >= 1")
    return _gemm(m, n, k, hw, bytes_per_param)


def causal_context_sum(seq_len: int, window: int | None) -> int:
    """Sum over query positions of the attended context length."""
    S = seq_len
    if window is None or window >= S:
        return S * (S + 1) // 2
    W = window
    return W * (W + 1) // 2 + (S - W) * W


def attention_flops(model: ModelConfig, workload: WorkloadConfig, gpu_count: int) -> dict:
    """Per-GPU FLOP counts of the attention block, keyed by sub-operation."""
    q_heads = math.ceil(model.num_heads / gpu_count)
    kv_heads = math.ceil(model.num_kv_heads / gpu_count)
    hd = model.head_dim
    n_tok = workload.tokens
    ctx = workload.batch_size * causal_context_sum(workload.seq_len, model.sliding_window)
    return {
        "qkv": 2.0 * n_tok * model.hidden_dim * hd * (q_heads + 2 * kv_heads),
        "score": 2.0 * hd * q_heads * ctx,
        "value": 2.0 * hd * q_heads * ctx,
        "out": 2.0 * n_tok * hd * q_heads * model.hidden_dim,
    }


def attention_time(
    model: ModelConfig,
    workload: WorkloadConfig,
    hw: HardwareConfig,
    per_token_epsilon: float = 0.0,
) -> float:
    """Tensor-parallel attention: projections, scores, weighted values, output.

    Heads are split across GPUs; when there are fewer KV heads than GPUs each
    GPU still holds one (padded). Scores are materialised (no fused kernel).
    """
    G = hw.gpu_count
    bpp = model.bytes_per_param
    q_heads = math.ceil(model.num_heads / G)
    kv_heads = math.ceil(model.num_kv_heads / G)
    hd = model.head_dim
    B, S = workload.batch_size, workload.seq_len
    n_tok = workload.tokens
    ctx = B * causal_context_sum(S, model.sliding_window)
    fl = attention_flops(model, workload, G)

    t = _gemm(n_tok, hd * (q_heads + 2 * kv_heads), model.hidden_dim, hw, bpp)
    score_bytes = bpp * (q_heads * n_tok * hd + kv_heads * n_tok * hd + q_heads * ctx)
    t += roofline_time(fl["score"], score_bytes, hw)
    value_bytes = bpp * (q_heads * ctx + kv_heads * n_tok * hd + q_heads * n_tok * hd)
    t += roofline_time(fl["value"], value_bytes, hw)
    t += _gemm(n_tok, model.hidden_dim, hd * q_heads, hw, bpp)
    return t + per_token_epsilon * n_tok


def ring_allreduce_time(nbytes: float, hw: HardwareConfig) -> float:
    if nbytes < 0:
        raise InvalidInputError("bytes must be >= 0")
    G = hw.gpu_count
    return 2.0 * (G - 1) / G * nbytes / hw.link_bandwidth + 2.0 * (G - 1) * hw.link_latency


def scatter_fraction(gpu_count: int, skew: float) -> float:
    """Share of all token bytes that the busiest GPU must receive."""
    if skew < 1:
        raise InvalidInputError(f"skew must be >= 1, got {skew}")
    G = gpu_count
    return (G - 1) * skew / G**2


def scatter_time(token_bytes_total: float, skew: float, hw: HardwareConfig) -> float:
    """All-to-all dispatch (or combine) time bounded by the busiest GPU."""
    frac = scatter_fraction(hw.gpu_count, skew)
    return token_bytes_total * frac / hw.link_bandwidth + hw.link_latency


def ffn_gemm_shapes(model: ModelConfig) -> list[tuple[int, int]]:
    """(n, k) of each expert GEMM; m is the token count."""
    d, f = model.hidden_dim, model.ffn_dim
    if model.activation == "swiglu":
        return [(f, d), (f, d), (d, f)]
    return [(f, d), (d, f)]


def ffn_time(tokens: float, model: ModelConfig, hw: HardwareConfig) -> float:
    """Expert FFN time for ``tokens`` routed assignments on one GPU."""
    if tokens < 0:
        raise InvalidInputError("tokens must be >= 0")
    return sum(_gemm(tokens, n, k, hw, model.bytes_per_param) for n, k in ffn_gemm_shapes(model))


def expert_weight_bytes(model: ModelConfig, two_matrix: bool = False) -> int:
    d, f, bpp = model.hidden_dim, model.ffn_dim, model.bytes_per_param
    if two_matrix:
        return 2 * d * f * bpp
    return len(ffn_gemm_shapes(model)) * d * f * bpp


def expert_transfer_time(model: ModelConfig, hw: HardwareConfig, experts_moved: int = 1, two_matrix: bool = False) -> float:
    """Time to ship ``experts_moved`` expert weight sets over one link.

    ``two_matrix`` counts two d x ffn_dim matrices per expert regardless of
    activation: the simpler up/down count behind back-of-envelope estimates.
    """
    if experts_moved < 0:
        raise InvalidInputError("experts_moved must be >= 0")
    return experts_moved * expert_weight_bytes(model, two_matrix) / hw.link_bandwidth
