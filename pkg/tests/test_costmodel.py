import math

import pytest
from hypothesis import given, strategies as st

from moegps.costmodel import (
    LatencyBreakdown,
    attention_flops,
    attention_time,
    causal_context_sum,
    expert_transfer_time,
    expert_weight_bytes,
    ffn_time,
    gemm_time,
    ring_allreduce_time,
    scatter_fraction,
    scatter_time,
)
from moegps.domain import HardwareConfig, InvalidInputError, ModelConfig, WorkloadConfig


def hw(**kw):
    base = dict(gpu_count=4, peak_flops=312e12, mem_bandwidth=1e30, link_bandwidth=2e12)
    return HardwareConfig(**{**base, **kw})


def test_gemm_compute_bound():
    assert gemm_time(1024, 1024, 1024, hw()) == pytest.approx(6.88e-6, rel=1e-3)
    assert gemm_time(1024, 1024, 1024, hw()) == pytest.approx(2 * 1024**3 / 312e12, rel=1e-15)
    assert gemm_time(1, 1, 1, hw()) == 2 / 312e12


def test_gemm_memory_bound():
    h = hw(mem_bandwidth=1e9)
    t = gemm_time(1, 1, 10**9, h)
    bw_term = (10**9 + 10**9 + 1) * 2 / 1e9
    compute_term = 2 * 10**9 / 312e12
    assert bw_term > compute_term
    assert t == bw_term


def test_gemm_rejects_zero():
    with pytest.raises(InvalidInputError):
        gemm_time(0, 4, 4, hw())


@given(st.integers(1, 4096), st.integers(1, 4096), st.integers(1, 4096), st.floats(1e9, 1e13), st.floats(0.05, 1.0))
def test_gemm_roofline_max(m, n, k, bw, eff):
    h = hw(mem_bandwidth=bw, compute_efficiency=eff)
    t = gemm_time(m, n, k, h)
    assert t >= 2 * m * n * k / (312e12 * eff) * (1 - 1e-12)
    assert t >= (m * k + k * n + m * n) * 2 / bw * (1 - 1e-12)


def brute_context_sum(S, W):
    return sum(min(p + 1, W) if W else p + 1 for p in range(S))


@pytest.mark.parametrize("S, W", [(1, None), (7, None), (100, 10), (100, 100), (100, 1000), (4096, 4096), (5000, 4096)])
def test_context_sum_oracle(S, W):
    assert causal_context_sum(S, W) == brute_context_sum(S, W)


def attn_model(window=None, kv=8):
    return ModelConfig(4096, 14336, 32, kv, 8, top_k=2, sliding_window=window)


def test_window_inactive_when_wider_than_sequence():
    w = WorkloadConfig(2, 1024, skewness=1.0)
    for h in (hw(), hw(mem_bandwidth=2e12)):
        assert attention_time(attn_model(4096), w, h) == attention_time(attn_model(None), w, h)


def test_attention_flops_oracle():
    # independent per-head count: projections + causal scores/values per query
    m, G = attn_model(), 4
    B, S = 2, 256
    hd, qh, kvh = 128, 8, 2
    proj = 2 * B * S * 4096 * hd * (qh + 2 * kvh) + 2 * B * S * hd * qh * 4096
    qk = sum(2 * hd * (p + 1) for p in range(S)) * qh * B
    fl = attention_flops(m, WorkloadConfig(B, S, skewness=1.0), G)
    assert fl["qkv"] + fl["out"] == proj
    assert fl["score"] == qk == fl["value"]


def test_attention_seq_doubling():
    m = attn_model()
    a = attention_flops(m, WorkloadConfig(1, 2048, skewness=1.0), 4)
    b = attention_flops(m, WorkloadConfig(1, 4096, skewness=1.0), 4)
    assert b["qkv"] == 2 * a["qkv"] and b["out"] == 2 * a["out"]
    # causal sum S(S+1)/2 grows by 2(2S+1)/(S+1), i.e. x4 up to O(1/S)
    assert b["score"] / a["score"] == pytest.approx(4.0, rel=1e-3)
    assert b["score"] / a["score"] == 2 * (2 * 2048 + 1) / (2048 + 1)


def test_attention_tp_split_linear():
    m = attn_model(kv=8)
    w = WorkloadConfig(1, 2048, skewness=1.0)
    f1, f4 = attention_flops(m, w, 1), attention_flops(m, w, 4)
    assert sum(f1.values()) == pytest.approx(4 * sum(f4.values()), rel=1e-12)
    t2 = attention_time(m, w, hw(gpu_count=2))
    t8 = attention_time(m, w, hw(gpu_count=8))
    assert t2 / t8 == pytest.approx(4.0, rel=1e-12)


def test_attention_padded_kv_heads_ok():
    m = ModelConfig(4096, 14336, 32, 2, 8)
    assert attention_time(m, WorkloadConfig(1, 128, skewness=1.0), hw(gpu_count=8)) > 0


def test_attention_epsilon():
    m, w = attn_model(), WorkloadConfig(1, 100, skewness=1.0)
    assert attention_time(m, w, hw(), 1e-9) == pytest.approx(attention_time(m, w, hw()) + 100e-9, rel=1e-12)


def test_allreduce_examples():
    h = hw(link_latency=3e-6)
    assert ring_allreduce_time(0, h) == 2 * 3 * 3e-6
    assert ring_allreduce_time(1e9, hw()) == pytest.approx(0.75e-3, rel=1e-12)
    assert ring_allreduce_time(12345, hw(gpu_count=2)) == pytest.approx(12345 / 2e12, rel=1e-12)


@pytest.mark.parametrize("G, s, frac", [(4, 1.0, 0.1875), (4, 3.0, 0.5625), (2, 1.0, 0.25)])
def test_scatter_fraction(G, s, frac):
    assert scatter_fraction(G, s) == pytest.approx(frac, abs=1e-12)
    assert scatter_time(1e9, s, hw(gpu_count=G)) == pytest.approx(1e9 * frac / 2e12, rel=1e-12)


def test_scatter_rejects_low_skew():
    with pytest.raises(InvalidInputError):
        scatter_time(10, 0.9, hw())


@given(st.floats(0, 1e10), st.floats(1, 8), st.floats(1, 8))
def test_scatter_linear_in_skew(nbytes, s1, s2):
    h = hw()
    slope = nbytes * 3 / (16 * 2e12)
    assert scatter_time(nbytes, s2, h) - scatter_time(nbytes, s1, h) == pytest.approx(slope * (s2 - s1), rel=1e-9, abs=1e-24)


def test_ffn_examples():
    m = attn_model()
    assert ffn_time(0, m, hw()) == 0.0
    tokens = 1000
    assert ffn_time(tokens, m, hw()) * 312e12 / tokens == pytest.approx(2 * 3 * 4096 * 14336, rel=1e-12)
    relu = ModelConfig(4096, 14336, 32, 8, 8, activation="relu")
    assert ffn_time(tokens, relu, hw()) * 312e12 / tokens == pytest.approx(2 * 2 * 4096 * 14336, rel=1e-12)
    assert ffn_time(2 * tokens, m, hw()) == pytest.approx(2 * ffn_time(tokens, m, hw()), rel=1e-9)


def test_expert_transfer():
    m = attn_model()
    assert expert_weight_bytes(m, two_matrix=True) == 234_881_024 == 4096 * 14336 * 2 * 2
    assert expert_weight_bytes(m) == 3 * 4096 * 14336 * 2
    t = expert_transfer_time(m, hw(), 1, two_matrix=True)
    assert t == pytest.approx(1.17e-4, rel=5e-3)
    assert expert_transfer_time(m, hw(link_bandwidth=32e9), 1, two_matrix=True) == pytest.approx(7.34e-3, rel=1e-3)
    assert expert_transfer_time(m, hw(), 0) == 0.0
    relu = ModelConfig(4096, 14336, 32, 8, 8, activation="relu")
    assert expert_weight_bytes(relu) == 2 * 4096 * 14336 * 2


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_primitives_monotone(a, b):
    lo, hi = sorted((a, b))
    h, m = hw(mem_bandwidth=2e12), attn_model()
    assert ffn_time(lo, m, h) <= ffn_time(hi, m, h)
    assert ring_allreduce_time(lo, h) <= ring_allreduce_time(hi, h)
    assert scatter_time(lo, 1.3, h) <= scatter_time(hi, 1.3, h)
    assert expert_transfer_time(m, h, lo % 50) <= expert_transfer_time(m, h, lo % 50 + 1)


def test_breakdown_total_and_validation():
    b = LatencyBreakdown(1e-3, 2e-4, 3e-5, 4e-3, 5e-6, 6e-7, 7e-8)
    assert abs(b.total - sum((1e-3, 2e-4, 3e-5, 4e-3, 5e-6, 6e-7, 7e-8))) <= 1e-12
    assert b.as_dict()["total"] == b.total
    assert math.isclose(sum(b.shares().values()), 1.0)
    with pytest.raises(InvalidInputError):
        LatencyBreakdown(attention=-1.0)
