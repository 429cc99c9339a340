import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moegps.domain import ExpertTrace, InvalidInputError, WorkloadConfig, distribution_from_skewness, sample_trace
from moegps.predictors import (
    Calibration,
    ConstantPredictor,
    CurveAnchor,
    OverheadCurve,
    PredictorSpec,
    calibration_from_dict,
    evaluate_accuracy,
    fit_conditional_model,
    fit_probability_model,
    overhead_fraction,
)


def trace(experts, num_experts=4, **kw):
    return ExpertTrace((np.asarray(experts),), num_experts=num_experts, **kw)


def test_probability_model_argmax():
    m = fit_probability_model(trace([0, 0, 0, 1]))
    assert m.top[0].tolist() == [0]


def test_probability_model_tie_goes_low():
    assert fit_probability_model(trace([3, 2, 1, 0])).top[0].tolist() == [0]
    assert fit_probability_model(trace([3, 3, 1, 1])).top[0].tolist() == [1]


def test_probability_accuracy_equals_hot_frequency():
    dist = distribution_from_skewness(8, 2.5)
    train = sample_trace(dist, WorkloadConfig(1, 4000, skewness=2.5), seed=1)
    test = sample_trace(dist, WorkloadConfig(1, 3000, skewness=2.5), seed=2)
    m = fit_probability_model(train)
    hot = int(m.top[0][0])
    expected = np.mean(test.layers[0][:, 0] == hot)
    assert evaluate_accuracy(m, test) == pytest.approx(expected, abs=1e-15)


def test_conditional_toy_vocabulary():
    # token A (id 0) always routes to expert 1, token B (id 1) to expert 2
    ids = np.array([0, 1, 0, 0, 1, 0, 1, 0])
    tr = trace(np.where(ids == 0, 1, 2), token_ids=ids)
    cond = fit_conditional_model(tr, key="token_id")
    prob = fit_probability_model(tr)
    assert evaluate_accuracy(cond, tr) == 1.0
    assert evaluate_accuracy(prob, tr) == pytest.approx(5 / 8)


def test_conditional_collapses_with_one_key():
    dist = distribution_from_skewness(8, 1.7)
    tr = sample_trace(dist, WorkloadConfig(1, 500, skewness=1.7), seed=5)
    tr = ExpertTrace(tr.layers, 8, positions=np.zeros(tr.token_count, dtype=int))
    cond = fit_conditional_model(tr, key="position")
    prob = fit_probability_model(tr)
    np.testing.assert_array_equal(cond.table[0][0], prob.top[0])
    assert evaluate_accuracy(cond, tr) == evaluate_accuracy(prob, tr)


def test_conditional_unseen_key_falls_back():
    tr = trace([2, 2, 1], positions=np.array([0, 1, 2]))
    cond = fit_conditional_model(tr, key="position")
    test = trace([2, 1], positions=np.array([7, 7]))
    assert [p.tolist() for p in cond.predict(test)] == [[[2], [2]]]


def test_missing_key_is_invalid():
    with pytest.raises(InvalidInputError):
        fit_conditional_model(trace([0, 1]), key="token_id")


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(2, 40))
def test_conditional_beats_probability_on_train(seed, k, n_keys):
    rng = np.random.default_rng(seed)
    T, E = 300, 8
    keys = rng.integers(0, n_keys, T)
    layers = tuple(np.stack([rng.permutation(E)[:k] for _ in range(T)]) for _ in range(2))
    tr = ExpertTrace(layers, E, token_ids=keys)
    cond = evaluate_accuracy(fit_conditional_model(tr, key="token_id"), tr)
    prob = evaluate_accuracy(fit_probability_model(tr), tr)
    assert cond >= prob - 1e-12
    assert 0.0 <= prob <= cond <= 1.0


def test_perfect_and_wrong_predictors():
    tr = trace([3] * 10)
    assert evaluate_accuracy(ConstantPredictor((3,)), tr) == 1.0
    assert evaluate_accuracy(ConstantPredictor((0,)), tr) == 0.0


def test_top_k_accuracy_counts_slots():
    tr = ExpertTrace((np.array([[0, 1], [0, 2]]),), 4)
    assert evaluate_accuracy(ConstantPredictor((0, 1)), tr) == pytest.approx(3 / 4)


def test_predictions_deterministic():
    dist = distribution_from_skewness(8, 1.4)
    tr = sample_trace(dist, WorkloadConfig(4, 64, skewness=1.4), top_k=2, seed=9)
    a = fit_conditional_model(tr).predict(tr)
    b = fit_conditional_model(tr).predict(tr)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


# overhead curve


def test_overhead_fraction_arithmetic():
    curve = OverheadCurve((CurveAnchor(1.0, 1e-4, 8.0),))
    assert overhead_fraction(curve, 0.6, 1.0) == pytest.approx(1e-4 * math.exp(4.8), rel=1e-12)
    assert overhead_fraction(curve, 0.6, 1.0) == pytest.approx(0.01215, abs=1e-5)


TWO = OverheadCurve(({"skewness": 1.0, "alpha": 2e-4, "beta": 6.0}, {"skewness": 2.0, "alpha": 1e-4, "beta": 4.0}))


def test_overhead_interpolation():
    assert TWO.params(1.0) == (2e-4, 6.0)
    assert TWO.params(2.0) == (1e-4, 4.0)
    a, b = TWO.params(1.5)
    assert a == pytest.approx(1.5e-4) and b == pytest.approx(5.0)
    assert TWO.params(0.5) == TWO.params(1.0)
    assert TWO.params(9.0) == TWO.params(2.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.5, 3.0))
def test_overhead_monotone_in_accuracy(a, b, s):
    lo, hi = sorted((a, b))
    assert overhead_fraction(TWO, lo, s) <= overhead_fraction(TWO, hi, s)


@given(st.floats(1.0, 2.0))
def test_overhead_continuous_in_skew(s):
    d = 1e-7
    assert abs(overhead_fraction(TWO, 0.8, s + d) - overhead_fraction(TWO, 0.8, s)) < 1e-6


def test_curve_validation():
    with pytest.raises(InvalidInputError):
        OverheadCurve(())
    with pytest.raises(InvalidInputError):
        OverheadCurve((CurveAnchor(2.0, 1e-4, 1), CurveAnchor(1.0, 1e-4, 1)))
    with pytest.raises(InvalidInputError):
        OverheadCurve((CurveAnchor(1.0, -1e-4, 1),))
    with pytest.raises(InvalidInputError):
        overhead_fraction(TWO, 1.2, 1.0)


def test_skew_ordering_warning():
    data = {"anchors": [{"skewness": 1.0, "alpha": 1e-4, "beta": 4}, {"skewness": 2.0, "alpha": 3e-4, "beta": 4}]}
    with pytest.warns(UserWarning, match="not cheaper"):
        calibration_from_dict(data)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        calibration_from_dict({"anchors": [{"skewness": 1.0, "alpha": 3e-4, "beta": 4}, {"skewness": 2.0, "alpha": 1e-4, "beta": 4}]})


def test_calibration_distribution_error():
    cal = calibration_from_dict({"distribution_error": [{"skewness": 2.0, "error_rate": 0.2}, {"skewness": 1.0, "error_rate": 0.1}]})
    assert cal.curve is None
    assert cal.distribution_error_at(1.5) == pytest.approx(0.15)
    assert cal.distribution_error_at(5.0) == pytest.approx(0.2)
    assert Calibration().distribution_error_at(1.0) is None


def test_predictor_spec_invariants():
    assert PredictorSpec.token_to_expert(0.8).epsilon == pytest.approx(0.2)
    assert PredictorSpec.token_to_expert(1.0).epsilon == 0.0
    assert PredictorSpec.distribution_only(0.03).epsilon == 0.03
    assert PredictorSpec.none().epsilon == 0.0
    for bad in (
        dict(kind="token_to_expert"),
        dict(kind="none", accuracy=0.9),
        dict(kind="distribution_only"),
        dict(kind="distribution_only", accuracy=0.9, error_rate=0.1),
        dict(kind="token_to_expert", accuracy=1.1),
        dict(kind="magic"),
        dict(kind="none", error_scenario="median"),
    ):
        with pytest.raises(InvalidInputError):
            PredictorSpec(**bad)
