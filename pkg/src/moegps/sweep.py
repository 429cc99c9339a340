"""Grid sweeps, best-accuracy search, savings comparison and strategy recommendation."""

from __future__ import annotations

import csv
import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .config import RunConfig
from .costmodel import LatencyBreakdown
from .domain import HardwareConfig, InvalidInputError, WorkloadConfig
from .estimation import synthetic_error_rate
from .pipeline import simulate_layer
from .predictors import KINDS, PredictorSpec

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "hardware_id", "link_bandwidth", "skewness", "strategy", "accuracy",
    "attention_s", "allreduce_s", "scatter_s", "ffn_s", "gather_s", "overhead_s", "residual_s", "total_s",
)
_STRATEGY_RANK = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class SweepRecord:
    hardware_id: str
    link_bandwidth: float
    skewness: float
    strategy: str
    accuracy: Optional[float]
    error_rate: float
    breakdown: LatencyBreakdown

    @property
    def total(self) -> float:
        return self.breakdown.total

    def row(self) -> dict:
        b = self.breakdown
        return {
            "hardware_id": self.hardware_id,
            "link_bandwidth": repr(self.link_bandwidth),
            "skewness": repr(self.skewness),
            "strategy": self.strategy,
            "accuracy": "" if self.accuracy is None else repr(self.accuracy),
            "attention_s": repr(b.attention),
            "allreduce_s": repr(b.allreduce),
            "scatter_s": repr(b.scatter),
            "ffn_s": repr(b.ffn),
            "gather_s": repr(b.gather),
            "overhead_s": repr(b.prediction_overhead),
            "residual_s": repr(b.placement_residual),
            "total_s": repr(b.total),
        }

    def to_json(self) -> dict:
        return {
            "hardware_id": self.hardware_id,
            "link_bandwidth": self.link_bandwidth,
            "skewness": self.skewness,
            "strategy": self.strategy,
            "accuracy": self.accuracy,
            "error_rate": self.error_rate,
            "breakdown": self.breakdown.as_dict(),
        }


@lru_cache(maxsize=256)
def _synthetic_error(num_experts, skew, train_tokens, test_tokens, top_k, seed) -> float:
    return min(1.0, synthetic_error_rate(num_experts, skew, train_tokens, test_tokens, top_k, seed))


def distribution_error_for(skew: float, cfg: RunConfig) -> float:
    """Distribution-Only error rate at ``skew``.

    Order of precedence: a fixed number in the config, the calibration's
    measured anchors, then a synthetic train/test estimate.
    """
    setting = cfg.distribution_error
    if isinstance(setting, (int, float)) and not isinstance(setting, bool):
        return float(setting)
    if setting is None:
        measured = cfg.calibration.distribution_error_at(skew)
        if measured is not None:
            log.debug("distribution error at s=%s from calibration: %.4g", skew, measured)
            return measured
        setting = {"synthetic": {}}
    if isinstance(setting, dict) and "synthetic" in setting:
        p = setting["synthetic"] or {}
        tokens = cfg.workload.tokens
        return _synthetic_error(
            cfg.model.num_experts, float(skew),
            int(p.get("train_tokens", 10 * tokens)), int(p.get("test_tokens", tokens)),
            cfg.model.top_k, int(p.get("seed", cfg.seed)),
        )
    raise InvalidInputError(f"bad distribution_error setting {setting!r}")


def _point_specs(strategies, accuracies, eps_dist, scenario):
    for kind in strategies:
        if kind == "none":
            yield PredictorSpec.none()
        elif kind == "distribution_only":
            yield PredictorSpec.distribution_only(eps_dist, scenario)
        else:
            for a in accuracies:
                yield PredictorSpec.token_to_expert(a, scenario)


def run_sweep(
    cfg: RunConfig,
    skewness: Optional[Sequence[float]] = None,
    accuracies: Optional[Sequence[float]] = None,
    hardware: Optional[Sequence[HardwareConfig]] = None,
    strategies: Sequence[str] = KINDS,
    scenario: str = "typical",
    workers: int = 1,
) -> list:
    """One record per (hardware, skewness, strategy[, accuracy]) point, sorted."""
    skewness = tuple(cfg.skewness_grid if skewness is None else skewness)
    accuracies = tuple(cfg.accuracy_grid if accuracies is None else accuracies)
    hardware = tuple(hardware or cfg.hardware_grid or (cfg.hardware,))
    if not (skewness and hardware and strategies):
        raise InvalidInputError("sweep grid is empty")
    if "token_to_expert" in strategies and not accuracies:
        raise InvalidInputError("token_to_expert sweep needs accuracies")
    bad = set(strategies) - set(KINDS)
    if bad:
        raise InvalidInputError(f"unknown strategies {sorted(bad)}")
    curve = cfg.calibration.curve
    if "token_to_expert" in strategies and curve is None:
        raise InvalidInputError("token_to_expert sweep needs an overhead curve in the calibration")

    jobs = []
    for hi, hw in enumerate(hardware):
        for s in skewness:
            w = WorkloadConfig(cfg.workload.batch_size, cfg.workload.seq_len, skewness=s)
            eps = distribution_error_for(s, cfg) if "distribution_only" in strategies else 0.0
            for spec in _point_specs(strategies, accuracies, eps, scenario):
                jobs.append((hi, hw, s, w, spec))

    log.debug("sweep: %d points on %d workers", len(jobs), workers)

    def run(job):
        hi, hw, s, w, spec = job
        b = simulate_layer(spec, cfg.model, w, hw, curve, cfg.options)
        return hi, SweepRecord(hw.name, hw.link_bandwidth, s, spec.kind, spec.accuracy, spec.epsilon, b)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1].skewness, _STRATEGY_RANK[r[1].strategy], r[1].accuracy or 0.0))
    return [r for _, r in results]


def best_token_to_expert(records: Iterable[SweepRecord]) -> tuple:
    """``(accuracy, total)`` of the fastest token_to_expert record; ties go to lower accuracy."""
    t2e = [r for r in records if r.strategy == "token_to_expert"]
    if not t2e:
        raise InvalidInputError("no token_to_expert records")
    best = min(t2e, key=lambda r: (r.total, r.accuracy))
    return best.accuracy, best.total


@dataclass(frozen=True)
class Savings:
    absolute: float  # seconds; > 0 means Distribution-Only is faster
    fraction: float  # absolute / baseline total


def savings_difference(baseline: float, dist_only: float, best_t2e: float) -> Savings:
    """Distribution-Only saving minus Token-to-Expert saving, both against no prediction."""
    diff = (baseline - dist_only) - (baseline - best_t2e)
    return Savings(diff, diff / baseline if baseline else 0.0)


def group_points(records: Iterable[SweepRecord]) -> dict:
    """(hardware_id, skewness) -> {strategy: [records]}."""
    out: dict = {}
    for r in records:
        out.setdefault((r.hardware_id, r.skewness), {}).setdefault(r.strategy, []).append(r)
    return out


def savings_table(records: Sequence[SweepRecord]) -> list:
    rows = []
    for (hw_id, s), by in group_points(records).items():
        base = by["none"][0].total
        dist = by["distribution_only"][0].total
        a_star, t_star = best_token_to_expert(by["token_to_expert"])
        sv = savings_difference(base, dist, t_star)
        rows.append({
            "hardware_id": hw_id,
            "link_bandwidth": by["none"][0].link_bandwidth,
            "skewness": s,
            "baseline_s": base,
            "distribution_only_s": dist,
            "best_accuracy": a_star,
            "best_token_to_expert_s": t_star,
            "savings_difference_s": sv.absolute,
            "savings_difference_frac": sv.fraction,
        })
    return rows


@dataclass(frozen=True)
class Recommendation:
    strategy: str
    accuracy: Optional[float]
    total: float
    savings: Optional[Savings]
    candidates: tuple  # of SweepRecord, one per strategy family (best accuracy for t2e)
    warnings: tuple = ()

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "accuracy": self.accuracy,
            "total_s": self.total,
            "savings_difference_s": None if self.savings is None else self.savings.absolute,
            "savings_difference_frac": None if self.savings is None else self.savings.fraction,
            "candidates": [r.to_json() for r in self.candidates],
            "warnings": list(self.warnings),
        }


def recommend(cfg: RunConfig, scenario: str = "typical") -> Recommendation:
    """Pick the fastest strategy for the config's single (hardware, skewness) point."""
    notes = []
    strategies = list(KINDS)
    if cfg.calibration.curve is None:
        msg = "no overhead curve: token_to_expert left out of the recommendation"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
        strategies.remove("token_to_expert")
    s = cfg.workload.effective_skewness()
    records = run_sweep(cfg, skewness=[s], hardware=[cfg.hardware], strategies=strategies, scenario=scenario)
    by = group_points(records)[(cfg.hardware.name, s)]
    candidates = [by["none"][0], by["distribution_only"][0]]
    savings = None
    if "token_to_expert" in by:
        a_star, t_star = best_token_to_expert(by["token_to_expert"])
        candidates.append(next(r for r in by["token_to_expert"] if r.accuracy == a_star))
        savings = savings_difference(candidates[0].total, candidates[1].total, t_star)
    # ties keep the cheaper strategy (earlier in KINDS)
    best = min(candidates, key=lambda r: r.total)
    return Recommendation(best.strategy, best.accuracy, best.total, savings, tuple(candidates), tuple(notes))


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()
