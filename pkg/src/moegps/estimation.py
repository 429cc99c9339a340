"""Multinomial MLE of per-layer expert distributions and the error-rate metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ExpertTrace, InvalidInputError, TokenDistribution, WorkloadConfig, distribution_from_skewness, sample_trace


@dataclass(frozen=True)
class DistributionEstimate:
    """Estimated probabilities (layers, experts) and the counts behind them."""

    probs: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, ndmin=2)
        c = np.array(self.counts, dtype=float, ndmin=2)
        if p.shape != c.shape:
            raise InvalidInputError("probs and counts must have the same shape")
        if np.any(c < 0):
            raise InvalidInputError("counts must be >= 0")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "counts", c)

    def distribution(self) -> TokenDistribution:
        return TokenDistribution(self.probs)

    def to_json(self) -> dict:
        return {"probs": self.probs.tolist(), "counts": self.counts.tolist()}


def _normalise(counts: np.ndarray, smoothing: float = 0.0) -> np.ndarray:
    c = counts + smoothing
    totals = c.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise InvalidInputError("every layer needs at least one observation")
    return c / totals


def mle_from_counts(counts, smoothing: float = 0.0) -> DistributionEstimate:
    """``p_i = n_i / N`` per layer; ``smoothing`` adds a Laplace pseudo-count."""
    c = np.array(counts, dtype=float, ndmin=2)
    if np.any(c < 0):
        raise InvalidInputError("counts must be >= 0")
    return DistributionEstimate(_normalise(c, smoothing), c)


def mle_estimate(trace: ExpertTrace, smoothing: float = 0.0) -> DistributionEstimate:
    if trace.token_count < 1:
        raise InvalidInputError("trace has an empty layer")
    return mle_from_counts(trace.counts(), smoothing)


def update_moving_average(
    prev: DistributionEstimate | None,
    batch_counts,
    mode: str = "cumulative",
    lam: float | None = None,
) -> DistributionEstimate:
    """Fold one batch of counts into a running estimate.

    ``cumulative`` pools the counts, so the result equals the MLE over every
    batch seen. ``exponential`` blends ``(1 - lam) * prev + lam * batch_mle``.
    """
    batch = np.array(batch_counts, dtype=float, ndmin=2)
    if np.any(batch < 0):
        raise InvalidInputError("batch counts must be >= 0")
    if prev is None:
        return mle_from_counts(batch)
    if prev.counts.shape != batch.shape:
        raise InvalidInputError("batch counts do not match the estimate's shape")
    if mode == "cumulative":
        return mle_from_counts(prev.counts + batch)
    if mode == "exponential":
        if lam is None or not 0 < lam <= 1:
            raise InvalidInputError("exponential mode needs lam in (0, 1]")
        blended = (1 - lam) * prev.probs + lam * _normalise(batch)
        blended /= blended.sum(axis=1, keepdims=True)
        return DistributionEstimate(blended, prev.counts + batch)
    raise InvalidInputError(f"unknown moving-average mode {mode!r}")


def _as_probs(x) -> np.ndarray:
    if isinstance(x, (DistributionEstimate, TokenDistribution)):
        return x.probs
    return np.array(x, dtype=float, ndmin=2)


def error_rate(estimate, truth) -> float:
    """Mean absolute deviation per expert, normalised by ``1/E``, averaged over layers."""
    p_hat, p = _as_probs(estimate), _as_probs(truth)
    if p_hat.shape != p.shape:
        raise InvalidInputError(f"shape mismatch {p_hat.shape} vs {p.shape}")
    E = p.shape[1]
    per_layer = np.abs(p_hat - p).mean(axis=1) * E
    return float(per_layer.mean())


def per_expert_relative_error(estimate, truth) -> np.ndarray:
    """``|p_hat - p| / p`` per (layer, expert); inf where ``p == 0`` and ``p_hat != 0``."""
    p_hat, p = _as_probs(estimate), _as_probs(truth)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(p_hat - p) / p
    return np.where((p == 0) & (p_hat == p), 0.0, rel)


def synthetic_error_rate(
    num_experts: int,
    skew: float,
    train_tokens: int,
    test_tokens: int,
    top_k: int = 1,
    seed: int = 0,
) -> float:
    """Train-on-one-sample, score-on-another error rate for a synthetic skewed workload.

    Mirrors the offline protocol: estimate on a training trace, compare with the
    empirical distribution of a held-out trace drawn from the same source.
    """
    dist = distribution_from_skewness(num_experts, skew)
    train = sample_trace(dist, WorkloadConfig(1, train_tokens, skewness=skew), top_k, seed=2 * seed)
    test = sample_trace(dist, WorkloadConfig(1, test_tokens, skewness=skew), top_k, seed=2 * seed + 1)
    return error_rate(mle_estimate(train), mle_estimate(test))
