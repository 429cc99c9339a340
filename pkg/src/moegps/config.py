"""Presets and run-config loading.

A run config is a JSON object::

    {
      "model": "mixtral-8x7b" | {...ModelConfig fields...},
      "hardware": "a100-nvlink" | {...},
      "workload": {"batch_size": 8, "seq_len": 8192, "skewness": 1.4},
      "calibration": "reference_curve.json" | {...},
      "strategy": {"kind": "token_to_expert", "accuracy": 0.8},
      "options": {...SimulationOptions fields...},
      "sweep": {"skewness": [...], "accuracy": [...], "hardware": [...]},
      "distribution_error": null | 0.02 | {"synthetic": {"train_tokens": ..., "test_tokens": ...}}
    }

Relative paths inside a config resolve against the config's directory, then
against the bundled ``configs/`` directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .domain import (
    HardwareConfig,
    InvalidInputError,
    ModelConfig,
    WorkloadConfig,
    hardware_from_dict,
    model_from_dict,
    workload_from_dict,
)
from .pipeline import SimulationOptions
from .predictors import Calibration, PredictorSpec, calibration_from_dict

MODEL_PRESETS = {
    "mixtral-8x7b": dict(
        hidden_dim=4096, ffn_dim=14336, num_heads=32, num_kv_heads=8, num_experts=8, top_k=2,
        sliding_window=4096, activation="swiglu", bytes_per_param=2, num_layers=32,
    ),
    # LLaMA-MoE-3.5B: LLaMA-2-7B FFN split into 8 experts, full attention
    "llama-moe-3.5b": dict(
        hidden_dim=4096, ffn_dim=1376, num_heads=32, num_kv_heads=32, num_experts=8, top_k=2,
        sliding_window=None, activation="swiglu", bytes_per_param=2, num_layers=32,
    ),
    "switch-base-8": dict(
        hidden_dim=768, ffn_dim=3072, num_heads=12, num_kv_heads=12, num_experts=8, top_k=1,
        sliding_window=None, activation="relu", bytes_per_param=2, num_layers=12,
    ),
}

# Rates are editable defaults. compute_efficiency=0.3 puts unfused attention
# at B=1, S=512 above the ~0.12 ms NVLink expert copy, as in the measured setup.
_A100 = dict(gpu_count=4, peak_flops=312e12, compute_efficiency=0.3, mem_bandwidth=2.039e12, link_latency=0.0)

HARDWARE_PRESETS = {
    "a100-nvlink": dict(_A100, link_bandwidth=2e12),
    "a100-600g": dict(_A100, link_bandwidth=600e9),
    "a100-64g": dict(_A100, link_bandwidth=64e9),
    "a100-pcie": dict(_A100, link_bandwidth=32e9),
}

DEFAULT_ACCURACIES = (0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99)
DEFAULT_SKEWNESS = (1.0, 1.4, 2.0, 2.6)


def bundled_config_dir() -> Path:
    return Path(str(resources.files("moegps") / "configs"))


def resolve_path(name, base: Optional[Path] = None) -> Path:
    p = Path(name)
    candidates = [p] if p.is_absolute() else ([base / p] if base else []) + [p, bundled_config_dir() / p]
    for c in candidates:
        if c.is_file():
            return c
    raise FileNotFoundError(f"config file not found: {name}")


def load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from exc


def model_from_spec(spec) -> ModelConfig:
    if isinstance(spec, str):
        if spec not in MODEL_PRESETS:
            raise InvalidInputError(f"unknown model preset {spec!r}")
        return ModelConfig(name=spec, **MODEL_PRESETS[spec])
    spec = dict(spec)
    preset = spec.pop("preset", None)
    if preset:
        return replace(model_from_spec(preset), **spec)
    return model_from_dict(spec)


def hardware_from_spec(spec) -> HardwareConfig:
    if isinstance(spec, str):
        if spec not in HARDWARE_PRESETS:
            raise InvalidInputError(f"unknown hardware preset {spec!r}")
        return HardwareConfig(name=spec, **HARDWARE_PRESETS[spec])
    spec = dict(spec)
    preset = spec.pop("preset", None)
    if preset:
        return replace(hardware_from_spec(preset), **spec)
    return hardware_from_dict(spec)


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    hardware: HardwareConfig
    workload: WorkloadConfig
    calibration: Calibration = field(default_factory=Calibration)
    strategy: PredictorSpec = field(default_factory=PredictorSpec)
    options: SimulationOptions = field(default_factory=SimulationOptions)
    skewness_grid: tuple = DEFAULT_SKEWNESS
    accuracy_grid: tuple = DEFAULT_ACCURACIES
    hardware_grid: tuple = ()
    distribution_error: object = None
    seed: int = 0


def _strategy_from_dict(d: dict) -> PredictorSpec:
    try:
        return PredictorSpec(**d)
    except TypeError as exc:
        raise InvalidInputError(f"strategy: {exc}") from exc


def run_config_from_dict(data: dict, base: Optional[Path] = None) -> RunConfig:
    known = {"model", "hardware", "workload", "calibration", "strategy", "options", "sweep", "distribution_error", "seed", "description"}
    unknown = set(data) - known
    if unknown:
        raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
    try:
        model = model_from_spec(data["model"])
        hardware = hardware_from_spec(data["hardware"])
        workload = workload_from_dict(data["workload"])
    except KeyError as exc:
        raise InvalidInputError(f"config is missing {exc}") from exc
    cal = data.get("calibration")
    if isinstance(cal, str):
        calibration = calibration_from_dict(load_json(resolve_path(cal, base)))
    elif isinstance(cal, dict):
        calibration = calibration_from_dict(cal)
    else:
        calibration = Calibration()
    try:
        options = SimulationOptions(**data.get("options", {}))
    except TypeError as exc:
        raise InvalidInputError(f"options: {exc}") from exc
    sweep = data.get("sweep", {})
    hw_grid = tuple(hardware_from_spec(h) for h in sweep.get("hardware", []))
    return RunConfig(
        model=model,
        hardware=hardware,
        workload=workload,
        calibration=calibration,
        strategy=_strategy_from_dict(data.get("strategy", {"kind": "none"})),
        options=options,
        skewness_grid=tuple(float(s) for s in sweep.get("skewness", DEFAULT_SKEWNESS)),
        accuracy_grid=tuple(float(a) for a in sweep.get("accuracy", DEFAULT_ACCURACIES)),
        hardware_grid=hw_grid,
        distribution_error=data.get("distribution_error"),
        seed=int(data.get("seed", 0)),
    )


def load_run_config(path) -> RunConfig:
    p = resolve_path(path)
    return run_config_from_dict(load_json(p), p.parent)
