"""Token-to-expert predictors and the accuracy -> overhead cost curve.

The frequency predictors are fitted directly on traces. Neural predictors are
not trained here; they enter the simulation only as points on an
``OverheadCurve`` loaded from a calibration file.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import ExpertTrace, InvalidInputError
from .errormodel import DEFAULT_SCENARIO, SCENARIOS

KINDS = ("none", "distribution_only", "token_to_expert")


# --------------------------------------------------------------------------- #
# Strategy description
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "none"
    accuracy: Optional[float] = None
    error_rate: Optional[float] = None
    error_scenario: str = DEFAULT_SCENARIO

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown strategy {self.kind!r}")
        if self.error_scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown error scenario {self.error_scenario!r}")
        if self.kind == "token_to_expert":
            if self.accuracy is None or not 0 <= self.accuracy <= 1:
                raise InvalidInputError("token_to_expert needs accuracy in [0, 1]")
            if self.error_rate is not None:
                raise InvalidInputError("token_to_expert takes accuracy, not error_rate")
        elif self.accuracy is not None:
            raise InvalidInputError(f"{self.kind} does not take an accuracy")
        if self.kind == "distribution_only":
            if self.error_rate is None or not 0 <= self.error_rate <= 1:
                raise InvalidInputError("distribution_only needs error_rate in [0, 1]")
        elif self.kind == "none" and self.error_rate is not None:
            raise InvalidInputError("none does not take an error_rate")

    @property
    def epsilon(self) -> float:
        if self.kind == "token_to_expert":
            return 1.0 - self.accuracy
        if self.kind == "distribution_only":
            return self.error_rate
        return 0.0

    @classmethod
    def none(cls) -> "PredictorSpec":
        return cls("none")

    @classmethod
    def distribution_only(cls, error_rate: float, scenario: str = DEFAULT_SCENARIO) -> "PredictorSpec":
        return cls("distribution_only", error_rate=error_rate, error_scenario=scenario)

    @classmethod
    def token_to_expert(cls, accuracy: float, scenario: str = DEFAULT_SCENARIO) -> "PredictorSpec":
        return cls("token_to_expert", accuracy=accuracy, error_scenario=scenario)


# --------------------------------------------------------------------------- #
# Overhead curve
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class CurveAnchor:
    skewness: float
    alpha: float
    beta: float


def _interp_anchor_params(xs, ys_list, x):
    if x <= xs[0]:
        return [ys[0] for ys in ys_list]
    if x >= xs[-1]:
        return [ys[-1] for ys in ys_list]
    j = int(np.searchsorted(xs, x, side="right"))
    x0, x1 = xs[j - 1], xs[j]
    w = (x - x0) / (x1 - x0)
    return [ys[j - 1] + w * (ys[j] - ys[j - 1]) for ys in ys_list]


@dataclass(frozen=True)
class OverheadCurve:
    """Prediction overhead as a fraction of layer runtime: ``alpha * exp(beta * a)``.

    ``alpha`` and ``beta`` are interpolated linearly in skewness between
    anchors and held constant beyond the outermost ones.
    """

    anchors: tuple

    def __post_init__(self):
        anchors = tuple(a if isinstance(a, CurveAnchor) else CurveAnchor(**a) for a in self.anchors)
        if not anchors:
            raise InvalidInputError("overhead curve needs at least one anchor")
        skews = [a.skewness for a in anchors]
        if any(b <= a for a, b in zip(skews, skews[1:])):
            raise InvalidInputError("anchors must be sorted by strictly increasing skewness")
        if any(a.alpha < 0 for a in anchors):
            raise InvalidInputError("alpha must be >= 0")
        object.__setattr__(self, "anchors", anchors)

    def params(self, skew: float) -> tuple:
        xs = [a.skewness for a in self.anchors]
        alpha, beta = _interp_anchor_params(xs, ([a.alpha for a in self.anchors], [a.beta for a in self.anchors]), skew)
        return alpha, beta

    def check_skew_ordering(self, accuracies: Sequence[float] = tuple(np.linspace(0.5, 1.0, 11))) -> list:
        """Return (and warn about) anchor pairs where higher skew is not cheaper."""
        bad = []
        for lo, hi in zip(self.anchors, self.anchors[1:]):
            for a in accuracies:
                if hi.alpha * math.exp(hi.beta * a) > lo.alpha * math.exp(lo.beta * a):
                    bad.append((lo.skewness, hi.skewness, float(a)))
                    break
        if bad:
            warnings.warn(f"overhead curve: higher-skew anchors are not cheaper at equal accuracy: {bad}", stacklevel=2)
        return bad

    def to_json(self) -> dict:
        return {"anchors": [{"skewness": a.skewness, "alpha": a.alpha, "beta": a.beta} for a in self.anchors]}


def overhead_fraction(curve: OverheadCurve, accuracy: float, skew: float) -> float:
    if not 0 <= accuracy <= 1:
        raise InvalidInputError("accuracy must lie in [0, 1]")
    alpha, beta = curve.params(skew)
    return alpha * math.exp(beta * accuracy)


ZERO_CURVE = OverheadCurve((CurveAnchor(1.0, 0.0, 0.0),))


@dataclass(frozen=True)
class Calibration:
    """Overhead curve plus optional measured distribution-estimation error rates."""

    curve: Optional[OverheadCurve] = None
    distribution_error: tuple = ()  # of (skewness, error_rate), sorted

    def distribution_error_at(self, skew: float) -> Optional[float]:
        if not self.distribution_error:
            return None
        xs = [s for s, _ in self.distribution_error]
        (e,) = _interp_anchor_params(xs, ([r for _, r in self.distribution_error],), skew)
        return float(e)

    def to_json(self) -> dict:
        out = self.curve.to_json() if self.curve else {}
        if self.distribution_error:
            out["distribution_error"] = [{"skewness": s, "error_rate": r} for s, r in self.distribution_error]
        return out


def calibration_from_dict(data: dict) -> Calibration:
    try:
        curve = OverheadCurve(tuple(data["anchors"])) if data.get("anchors") else None
        derr = tuple(sorted((float(d["skewness"]), float(d["error_rate"])) for d in data.get("distribution_error", [])))
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed calibration: {exc}") from exc
    xs = [s for s, _ in derr]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InvalidInputError("distribution_error skewness values must be distinct")
    if any(not 0 <= r <= 1 for _, r in derr):
        raise InvalidInputError("distribution_error rates must lie in [0, 1]")
    if curve is not None:
        curve.check_skew_ordering()
    return Calibration(curve, derr)


def load_calibration(path) -> Calibration:
    with open(path) as fh:
        return calibration_from_dict(json.load(fh))


# --------------------------------------------------------------------------- #
# Frequency predictors
# --------------------------------------------------------------------------- #


def _top_k(counts: np.ndarray, k: int) -> np.ndarray:
    # stable sort on -counts: ties go to the lower expert id
    return np.argsort(-counts, kind="stable")[:k]


@dataclass(frozen=True)
class ProbabilityModel:
    """Predicts each layer's ``top_k`` globally most frequent experts for every token."""

    top: tuple  # per layer: array of expert ids

    def predict(self, trace: ExpertTrace) -> list:
        return [np.broadcast_to(self.top[l], (trace.token_count, len(self.top[l]))) for l in range(trace.num_layers)]


@dataclass(frozen=True)
class ConditionalModel:
    """Per (layer, key value) most frequent experts, falling back to the global model."""

    key: str
    table: tuple  # per layer: dict key value -> expert ids
    fallback: ProbabilityModel

    def predict(self, trace: ExpertTrace) -> list:
        keys = trace.key_values(self.key)
        out = []
        for l in range(trace.num_layers):
            tbl = self.table[l]
            default = self.fallback.top[l]
            out.append(np.stack([tbl.get(int(v), default) for v in keys]) if keys.size else np.zeros((0, len(default)), int))
        return out


def fit_probability_model(train: ExpertTrace, top_k: Optional[int] = None) -> ProbabilityModel:
    k = train.top_k if top_k is None else top_k
    if train.token_count < 1:
        raise InvalidInputError("training trace is empty")
    return ProbabilityModel(tuple(_top_k(c, k) for c in train.counts()))


def fit_conditional_model(train: ExpertTrace, key: str = "position", top_k: Optional[int] = None) -> ConditionalModel:
    k = train.top_k if top_k is None else top_k
    keys = train.key_values(key)
    E = train.num_experts
    uniq, inverse = np.unique(keys, return_inverse=True)
    tables = []
    for layer in train.layers:
        counts = np.zeros((uniq.size, E), dtype=np.int64)
        for slot in range(layer.shape[1]):
            np.add.at(counts, (inverse, layer[:, slot]), 1)
        tables.append({int(u): _top_k(counts[i], k) for i, u in enumerate(uniq)})
    return ConditionalModel(key, tuple(tables), fit_probability_model(train, k))


def evaluate_accuracy(predictor, test: ExpertTrace) -> float:
    """Fraction of routed assignments covered by the predicted experts, averaged over layers."""
    preds = predictor.predict(test)
    if len(preds) != test.num_layers:
        raise InvalidInputError("predictor and trace disagree on layer count")
    accs = []
    for pred, actual in zip(preds, test.layers):
        if actual.size == 0:
            continue
        hit = (actual[:, :, None] == np.asarray(pred)[:, None, :]).any(axis=2)
        accs.append(hit.mean())
    return float(np.mean(accs)) if accs else 0.0


@dataclass(frozen=True)
class ConstantPredictor:
    """Predicts fixed experts for every token; handy as a reference point."""

    experts: tuple = field(default=(0,))
    num_layers: int = 1

    def predict(self, trace: ExpertTrace) -> list:
        row = np.array(self.experts)
        return [np.broadcast_to(row, (trace.token_count, row.size)) for _ in range(trace.num_layers)]
