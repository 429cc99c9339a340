"""Prediction error -> bottleneck load and communication penalty."""

from __future__ import annotations

from .domain import InvalidInputError

SCENARIOS = ("optimistic", "typical", "pessimistic")
DEFAULT_SCENARIO = "typical"


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps <= 1.0:
        raise InvalidInputError(f"error rate must lie in [0, 1], got {eps}")


def bottleneck_tokens(avg_tokens: float, eps: float, scenario: str = DEFAULT_SCENARIO, gpu_count: int = 2) -> float:
    """Tokens on the busiest GPU for error rate ``eps``.

    The pessimistic envelope is ``G * (1 + eps) * avg`` as stated, so it does
    not collapse to ``avg`` at ``eps = 0``.
    """
    _check_eps(eps)
    if avg_tokens < 0:
        raise InvalidInputError("avg_tokens must be >= 0")
    if scenario == "optimistic":
        return avg_tokens
    if scenario == "typical":
        return (1.0 + eps) * avg_tokens
    if scenario == "pessimistic":
        return gpu_count * (1.0 + eps) * avg_tokens
    raise InvalidInputError(f"unknown error scenario {scenario!r}")


def comm_error_penalty(eps: float, balanced_scatter_time: float) -> float:
    """Extra transfer time when a fraction ``eps`` of tokens is misrouted."""
    _check_eps(eps)
    return eps * balanced_scatter_time
