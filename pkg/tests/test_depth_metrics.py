"""RMSE against a scalar-loop oracle; ratio-accuracy boundary semantics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixeluq import depth_metrics
from pixeluq.errors import InvalidParameterError, UndefinedMetricError


def oracle_rmse(depth, gt, valid):
    total, count = 0.0, 0
    for d, g, v in zip(depth.ravel(), gt.ravel(), valid.ravel()):
        if v:
            total += (float(d) - float(g)) ** 2
            count += 1
    return math.sqrt(total / count)


def test_rmse_zero_on_perfect():
    gt = np.array([[1.0, 2.0], [3.0, 4.0]])
    valid = np.ones((2, 2), dtype=bool)
    assert depth_metrics.rmse(gt, gt, valid) == 0.0


def test_rmse_constant_error():
    gt = np.full((3, 3), 5.0)
    valid = np.ones((3, 3), dtype=bool)
    valid[0, 0] = False
    assert depth_metrics.rmse(gt + 2.0, gt, valid) == pytest.approx(2.0, abs=1e-15)


def test_rmse_matches_oracle():
    rng = np.random.default_rng(21)
    for _ in range(20):
        depth = rng.uniform(0.5, 10, (6, 6))
        gt = rng.uniform(0.5, 10, (6, 6))
        valid = rng.random((6, 6)) > 0.2
        if not valid.any():
            continue
        assert depth_metrics.rmse(depth, gt, valid) == pytest.approx(
            oracle_rmse(depth, gt, valid), abs=1e-12
        )


def test_rmse_merge_matches_concatenation():
    rng = np.random.default_rng(22)
    accs = []
    parts = []
    for _ in range(3):
        d = rng.uniform(1, 5, (4, 4))
        g = rng.uniform(1, 5, (4, 4))
        v = rng.random((4, 4)) > 0.3
        parts.append((d, g, v))
        accs.append(depth_metrics.accumulate_rmse(d, g, v))
    merged = accs[0] + accs[1] + accs[2]
    whole = depth_metrics.accumulate_rmse(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
    )
    # partial sums associate differently; equal up to last-ulp rounding
    assert merged.value() == pytest.approx(whole.value(), abs=1e-12)
    assert merged.count == whole.count


def test_rmse_undefined_without_valid_pixels():
    with pytest.raises(UndefinedMetricError):
        depth_metrics.rmse(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2), dtype=bool))


# --- ratio accuracy -------------------------------------------------------


def test_exact_prediction_accurate_at_any_threshold():
    gt = np.full((2, 2), 4.0)
    valid = np.ones((2, 2), dtype=bool)
    for thr in depth_metrics.DELTA_THRESHOLDS:
        mask = depth_metrics.delta_accuracy(gt, gt, valid, thr)
        assert mask.accurate.all()


def test_boundary_ratio_is_inaccurate():
    # ratio exactly at the threshold fails the strict comparison
    depth = np.array([[10.0]])
    gt = np.array([[8.0]])
    valid = np.ones((1, 1), dtype=bool)
    mask = depth_metrics.delta_accuracy(depth, gt, valid, 1.25)
    assert not mask.accurate[0, 0]
    # a hair inside the boundary passes
    mask2 = depth_metrics.delta_accuracy(np.array([[10.0 - 1e-9]]), gt, valid, 1.25)
    assert mask2.accurate[0, 0]


def test_zero_prediction_is_inaccurate():
    mask = depth_metrics.delta_accuracy(
        np.array([[0.0]]), np.array([[3.0]]), np.ones((1, 1), dtype=bool), 1.25
    )
    assert not mask.accurate[0, 0]
    assert mask.valid[0, 0]


def test_accurate_implies_valid():
    rng = np.random.default_rng(23)
    depth = rng.uniform(0.5, 10, (5, 5))
    gt = rng.uniform(0.5, 10, (5, 5))
    valid = rng.random((5, 5)) > 0.4
    mask = depth_metrics.delta_accuracy(depth, gt, valid)
    assert not (mask.accurate & ~mask.valid).any()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_symmetry_and_monotonicity(seed):
    rng = np.random.default_rng(seed)
    depth = rng.uniform(0.1, 10, (4, 4))
    gt = rng.uniform(0.1, 10, (4, 4))
    valid = np.ones((4, 4), dtype=bool)
    d1, d2, d3 = (
        depth_metrics.delta_accuracy(depth, gt, valid, t)
        for t in depth_metrics.DELTA_THRESHOLDS
    )
    # symmetric in prediction and ground truth
    swapped = depth_metrics.delta_accuracy(gt, depth, valid, 1.25)
    np.testing.assert_array_equal(d1.accurate, swapped.accurate)
    # nested accuracy sets
    assert not (d1.accurate & ~d2.accurate).any()
    assert not (d2.accurate & ~d3.accurate).any()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.01, 100.0))
def test_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    depth = rng.uniform(0.1, 10, (4, 4))
    gt = rng.uniform(0.1, 10, (4, 4))
    valid = np.ones((4, 4), dtype=bool)
    base = depth_metrics.delta_accuracy(depth, gt, valid)
    scaled = depth_metrics.delta_accuracy(depth * scale, gt * scale, valid)
    np.testing.assert_array_equal(base.accurate, scaled.accurate)


def test_threshold_must_exceed_one():
    with pytest.raises(InvalidParameterError):
        depth_metrics.delta_accuracy(np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1), bool), 1.0)


def test_invalid_marker_mask():
    gt = np.array([[0.0, 2.0], [np.inf, 3.0]], dtype=np.float64)
    valid = depth_metrics.valid_depth_mask(gt, 0.0)
    np.testing.assert_array_equal(valid, [[False, True], [False, True]])
