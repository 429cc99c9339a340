"""Configuration types, routing traces, skewness and synthetic trace generation."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an argument or config violates a documented precondition."""


# --------------------------------------------------------------------------- #
# Configs
# --------------------------------------------------------------------------- #

TOPOLOGIES = ("fully_connected",)
ACTIVATIONS = ("swiglu", "relu")


@dataclass(frozen=True)
class HardwareConfig:
    gpu_count: int
    peak_flops: float
    mem_bandwidth: float
    link_bandwidth: float
    compute_efficiency: float = 1.0
    link_latency: float = 0.0
    topology: str = "fully_connected"
    name: str = "custom"

    def __post_init__(self):
        if int(self.gpu_count) != self.gpu_count or self.gpu_count < 2:
            raise InvalidInputError(f"gpu_count must be an integer >= 2, got {self.gpu_count}")
        for attr in ("peak_flops", "mem_bandwidth", "link_bandwidth"):
            if not getattr(self, attr) > 0:
                raise InvalidInputError(f"{attr} must be > 0")
        if not 0 < self.compute_efficiency <= 1:
            raise InvalidInputError("compute_efficiency must lie in (0, 1]")
        if self.link_latency < 0:
            raise InvalidInputError("link_latency must be >= 0")
        if self.topology not in TOPOLOGIES:
            raise InvalidInputError(f"unsupported topology {self.topology!r}")

    @property
    def effective_flops(self) -> float:
        return self.peak_flops * self.compute_efficiency


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int
    ffn_dim: int
    num_heads: int
    num_kv_heads: int
    num_experts: int
    top_k: int = 1
    sliding_window: Optional[int] = None
    activation: str = "swiglu"
    bytes_per_param: int = 2
    num_layers: int = 1
    name: str = "custom"

    def __post_init__(self):
        for attr in ("hidden_dim", "ffn_dim", "num_heads", "num_kv_heads", "bytes_per_param", "num_layers"):
            if getattr(self, attr) < 1:
                raise InvalidInputError(f"{attr} must be >= 1")
        if self.num_experts < 2:
            raise InvalidInputError("num_experts must be >= 2")
        if not 1 <= self.top_k <= self.num_experts:
            raise InvalidInputError("top_k must lie in [1, num_experts]")
        if self.num_heads % self.num_kv_heads:
            raise InvalidInputError("num_heads must be divisible by num_kv_heads")
        if self.hidden_dim % self.num_heads:
            raise InvalidInputError("hidden_dim must be divisible by num_heads")
        if self.sliding_window is not None and self.sliding_window < 1:
            raise InvalidInputError("sliding_window must be >= 1 when set")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"activation must be one of {ACTIVATIONS}")

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads


@dataclass(frozen=True)
class TokenDistribution:
    """Per-layer expert selection probabilities, shape (layers, experts)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, ndmin=2)
        if p.ndim != 2 or p.shape[1] < 1:
            raise InvalidInputError("distribution must be a (layers, experts) array")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidInputError("probabilities must be finite and >= 0")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidInputError("each layer's probabilities must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def num_layers(self) -> int:
        return self.probs.shape[0]

    @property
    def num_experts(self) -> int:
        return self.probs.shape[1]

    def skewness(self) -> float:
        """Mean per-layer skewness of the exact probabilities."""
        return float(np.mean([skewness_of(row) for row in self.probs]))

    def to_json(self) -> dict:
        return {"probs": self.probs.tolist()}


@dataclass(frozen=True)
class WorkloadConfig:
    batch_size: int
    seq_len: int
    skewness: Optional[float] = None
    distribution: Optional[TokenDistribution] = None

    def __post_init__(self):
        if self.batch_size < 1 or self.seq_len < 1:
            raise InvalidInputError("batch_size and seq_len must be >= 1")
        if self.skewness is not None and self.skewness < 1:
            raise InvalidInputError("skewness must be >= 1")
        if self.skewness is None and self.distribution is None:
            raise InvalidInputError("workload needs a skewness or a distribution")

    @property
    def tokens(self) -> int:
        return self.batch_size * self.seq_len

    def effective_skewness(self) -> float:
        if self.skewness is not None:
            return float(self.skewness)
        return self.distribution.skewness()

    def check_against(self, model: ModelConfig) -> None:
        s = self.effective_skewness()
        if s > model.num_experts + 1e-9:
            raise InvalidInputError(f"skewness {s} exceeds num_experts {model.num_experts}")
        if self.distribution is not None and self.distribution.num_experts != model.num_experts:
            raise InvalidInputError("distribution width does not match num_experts")


# --------------------------------------------------------------------------- #
# Traces
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ExpertTrace:
    """Routed expert ids per layer; each layer is an int array (tokens, top_k).

    ``token_ids`` and ``positions`` are optional per-token keys shared by all
    layers, used by the conditional predictor.
    """

    layers: tuple
    num_experts: int
    token_ids: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("trace needs at least one layer")
        arrays = []
        for arr in self.layers:
            try:
                a = np.array(arr, dtype=np.int64)
            except ValueError as exc:
                raise InvalidInputError("every token needs the same number of experts") from exc
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise InvalidInputError("each layer must be a (tokens, top_k) array")
            arrays.append(a)
        shape = arrays[0].shape
        for a in arrays:
            if a.shape != shape:
                raise InvalidInputError("all layers must have the same (tokens, top_k) shape")
            if a.size and (a.min() < 0 or a.max() >= self.num_experts):
                raise InvalidInputError("expert id out of range")
            a.setflags(write=False)
        object.__setattr__(self, "layers", tuple(arrays))
        for key in ("token_ids", "positions"):
            val = getattr(self, key)
            if val is not None:
                v = np.array(val, dtype=np.int64)
                if v.shape != (shape[0],):
                    raise InvalidInputError(f"{key} must have one entry per token")
                v.setflags(write=False)
                object.__setattr__(self, key, v)

    @property
    def token_count(self) -> int:
        return self.layers[0].shape[0]

    @property
    def top_k(self) -> int:
        return self.layers[0].shape[1]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def counts(self) -> np.ndarray:
        """Routed-assignment counts, shape (layers, experts)."""
        return np.stack([np.bincount(a.ravel(), minlength=self.num_experts) for a in self.layers])

    def layer_skewness(self) -> np.ndarray:
        return np.array([skewness_of(c) for c in self.counts()])

    def skewness(self) -> float:
        return float(self.layer_skewness().mean())

    def key_values(self, key: str) -> np.ndarray:
        if key == "token_id":
            if self.token_ids is None:
                raise InvalidInputError("trace carries no token ids")
            return self.token_ids
        if key == "position":
            if self.positions is None:
                raise InvalidInputError("trace carries no positions")
            return self.positions
        raise InvalidInputError(f"unknown key {key!r}")

    def select(self, layer_indices: Sequence[int] | None = None, tokens: slice | np.ndarray | None = None) -> "ExpertTrace":
        idx = range(self.num_layers) if layer_indices is None else layer_indices
        tok = slice(None) if tokens is None else tokens
        return ExpertTrace(
            layers=tuple(self.layers[i][tok] for i in idx),
            num_experts=self.num_experts,
            token_ids=None if self.token_ids is None else self.token_ids[tok],
            positions=None if self.positions is None else self.positions[tok],
        )


def skewness_of(counts) -> float:
    """Most popular expert's count over the mean count per expert."""
    c = np.asarray(counts, dtype=float).ravel()
    if c.size == 0:
        raise InvalidInputError("counts must be non-empty")
    if np.any(c < 0):
        raise InvalidInputError("counts must be >= 0")
    total = c.sum()
    if total <= 0:
        raise InvalidInputError("counts must have a positive total")
    return float(c.max() * c.size / total)


def distribution_from_skewness(num_experts: int, skew: float) -> TokenDistribution:
    """One hot expert at ``skew/E``; the others share the remainder equally."""
    if num_experts < 2:
        raise InvalidInputError("num_experts must be >= 2")
    if not 1.0 <= skew <= num_experts:
        raise InvalidInputError(f"skewness must lie in [1, {num_experts}], got {skew}")
    hot = skew / num_experts
    p = np.full(num_experts, (1.0 - hot) / (num_experts - 1))
    p[0] = hot
    return TokenDistribution(p[None, :])


def _layer_rng(seed: int, layer: int) -> np.random.Generator:
    # Philox is counter-based; keying by (seed, layer) keeps layers independent of order.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(layer)])))


def sample_trace(
    dist: TokenDistribution,
    workload: WorkloadConfig,
    top_k: int = 1,
    seed: int = 0,
    num_layers: Optional[int] = None,
) -> ExpertTrace:
    """Draw an i.i.d. routing trace of ``B*S`` tokens.

    With ``top_k > 1`` each token picks ``top_k`` distinct experts, sequentially
    and proportionally to ``p`` (Gumbel top-k). A layer of ``dist`` is reused
    cyclically when ``num_layers`` exceeds the layers it defines.
    """
    E = dist.num_experts
    if not 1 <= top_k <= E:
        raise InvalidInputError(f"top_k must lie in [1, {E}]")
    L = dist.num_layers if num_layers is None else num_layers
    n = workload.tokens
    layers = []
    with np.errstate(divide="ignore"):
        logp = np.log(dist.probs)
    for layer in range(L):
        rng = _layer_rng(seed, layer)
        lp = logp[layer % dist.num_layers]
        if top_k == 1:
            experts = rng.choice(E, size=n, p=dist.probs[layer % dist.num_layers])[:, None]
        else:
            keys = lp[None, :] + rng.gumbel(size=(n, E))
            experts = np.argsort(-keys, axis=1, kind="stable")[:, :top_k]
        layers.append(experts)
    positions = np.tile(np.arange(workload.seq_len), workload.batch_size)
    return ExpertTrace(tuple(layers), E, positions=positions)


# --------------------------------------------------------------------------- #
# I/O
# --------------------------------------------------------------------------- #


def write_trace(trace: ExpertTrace, dest) -> None:
    """JSON-lines, one record per layer; ``dest`` is a path or a text stream."""
    if not hasattr(dest, "write"):
        with open(dest, "w") as fh:
            write_trace(trace, fh)
        return
    for i, layer in enumerate(trace.layers):
        rec = {"layer": i, "experts": layer.tolist()}
        if trace.token_ids is not None:
            rec["token_ids"] = trace.token_ids.tolist()
        if trace.positions is not None:
            rec["positions"] = trace.positions.tolist()
        dest.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trace(path, num_experts: Optional[int] = None) -> ExpertTrace:
    records = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise InvalidInputError(f"{path}:{n}: invalid JSON ({exc})") from exc
    if not records:
        raise InvalidInputError(f"{path}: empty trace")
    try:
        records.sort(key=lambda r: r["layer"])
        layers = [np.array(r["experts"], dtype=np.int64).reshape(len(r["experts"]), -1) for r in records]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed trace record ({exc})") from exc
    if num_experts is None:
        num_experts = int(max(a.max() for a in layers if a.size)) + 1
        num_experts = max(num_experts, 2)
    first = records[0]
    return ExpertTrace(
        tuple(layers),
        num_experts,
        token_ids=first.get("token_ids"),
        positions=first.get("positions"),
    )


def _from_dict(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidInputError(f"{cls.__name__}: unknown fields {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise InvalidInputError(f"{cls.__name__}: {exc}") from exc


def hardware_from_dict(data: dict) -> HardwareConfig:
    return _from_dict(HardwareConfig, data)


def model_from_dict(data: dict) -> ModelConfig:
    return _from_dict(ModelConfig, data)


def workload_from_dict(data: dict) -> WorkloadConfig:
    data = dict(data)
    if "distribution" in data and data["distribution"] is not None:
        d = data["distribution"]
        data["distribution"] = TokenDistribution(d["probs"] if isinstance(d, dict) else d)
    return _from_dict(WorkloadConfig, data)


def to_dict(cfg) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = v.to_json() if isinstance(v, TokenDistribution) else v
    return out
