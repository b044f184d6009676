"""Loss references: analytic values and finite-difference gradient checks."""

import math

import numpy as np
import pytest

from pixeluq.losses_ref import VAR_FLOOR, GnllTerm, cross_entropy, gnll, joint_loss, softplus
from pixeluq.errors import InfiniteLossError, InvalidInputError


def central_diff(fn, x, h):
    return (fn(x + h) - fn(x - h)) / (2 * h)


# --- cross-entropy ----------------------------------------------------------


def test_certain_correct_prediction_is_zero_loss():
    loss, grad = cross_entropy(np.array([1.0, 0.0, 0.0]), 0)
    assert loss == 0.0
    assert grad[0] == -1.0
    assert grad[1] == grad[2] == 0.0


def test_inverse_e_probability_gives_unit_loss():
    p = math.exp(-1)
    probs = np.array([p, 1 - p])
    loss, _ = cross_entropy(probs, 0)
    assert loss == pytest.approx(1.0, abs=1e-12)


def test_zero_probability_raises():
    with pytest.raises(InfiniteLossError):
        cross_entropy(np.array([0.0, 1.0]), 0)


def test_cross_entropy_nonnegative_with_equality_iff_certain():
    rng = np.random.default_rng(51)
    for _ in range(200):
        probs = rng.dirichlet(np.ones(4))
        gt = int(rng.integers(0, 4))
        if probs[gt] == 0.0:
            continue
        loss, _ = cross_entropy(probs, gt)
        assert loss >= 0.0
        assert (loss == 0.0) == (probs[gt] == 1.0)


def test_cross_entropy_gradient_matches_finite_differences():
    rng = np.random.default_rng(52)
    h = 1e-7
    for _ in range(300):
        c = int(rng.integers(2, 8))
        probs = rng.dirichlet(np.ones(c))
        gt = int(rng.integers(0, c))
        if probs[gt] < 1e-3:
            continue
        _, grad = cross_entropy(probs, gt)

        def f(p_gt):
            shifted = probs.copy()
            shifted[gt] = p_gt
            return -math.log(shifted[gt])

        fd = central_diff(f, probs[gt], h)
        assert grad[gt] == pytest.approx(fd, rel=1e-4)


def test_cross_entropy_validation():
    with pytest.raises(InvalidInputError):
        cross_entropy(np.array([0.9, 0.9]), 0)  # not a distribution
    with pytest.raises(InvalidInputError):
        cross_entropy(np.array([0.5, 0.5]), 5)  # class out of range


# --- GNLL --------------------------------------------------------------------


def test_zero_residual_unit_variance_is_zero():
    value, d_mu, d_var = gnll(GnllTerm(y=2.0, mu=2.0, var=1.0))
    assert value == 0.0
    assert d_mu == 0.0
    assert d_var == pytest.approx(0.5, abs=1e-15)


def test_unit_residual_unit_variance():
    value, _, _ = gnll(GnllTerm(y=1.0, mu=0.0, var=1.0))
    assert value == 0.5


def test_gnll_gradients_match_finite_differences():
    rng = np.random.default_rng(53)
    for _ in range(300):
        y = float(rng.normal(0, 3))
        mu = float(rng.normal(0, 3))
        var = float(rng.uniform(0.05, 4.0))
        _, d_mu, d_var = gnll(GnllTerm(y=y, mu=mu, var=var))

        h_mu = 1e-6 * max(1.0, abs(mu))
        fd_mu = central_diff(lambda m: gnll(GnllTerm(y=y, mu=m, var=var))[0], mu, h_mu)
        if abs(d_mu) > 1e-8:
            assert d_mu == pytest.approx(fd_mu, rel=1e-4)

        h_var = 1e-6 * var
        fd_var = central_diff(lambda v: gnll(GnllTerm(y=y, mu=mu, var=v))[0], var, h_var)
        if abs(d_var) > 1e-8:
            assert d_var == pytest.approx(fd_var, rel=1e-4)


def test_gnll_minimized_at_squared_residual():
    # stationary in the variance at var = (y - mu)^2
    rng = np.random.default_rng(54)
    for _ in range(50):
        y = float(rng.normal(0, 2))
        mu = float(rng.normal(0, 2))
        resid_sq = (y - mu) ** 2
        if resid_sq < 10 * VAR_FLOOR:
            continue
        _, _, d_var = gnll(GnllTerm(y=y, mu=mu, var=resid_sq))
        assert d_var == pytest.approx(0.0, abs=1e-10)
        value_at_min = gnll(GnllTerm(y=y, mu=mu, var=resid_sq))[0]
        for factor in (0.5, 2.0):
            assert gnll(GnllTerm(y=y, mu=mu, var=factor * resid_sq))[0] > value_at_min


def test_variance_floor_flag():
    term = GnllTerm(y=0.0, mu=0.0, var=0.0)
    assert term.floored
    assert term.var == VAR_FLOOR
    assert not GnllTerm(y=0.0, mu=0.0, var=1.0).floored


# --- softplus ----------------------------------------------------------------


def test_softplus_known_values():
    assert softplus(0.0) == pytest.approx(math.log(2), abs=1e-15)
    assert softplus(100.0) == pytest.approx(100.0, rel=1e-12)
    assert softplus(-100.0) == pytest.approx(math.exp(-100.0), rel=1e-9)
    assert softplus(-100.0) > 0.0


def test_softplus_dominates_relu_and_is_monotone():
    x = np.linspace(-30, 30, 1001)
    s = softplus(x)
    assert (s > np.maximum(x, 0.0)).all()
    assert (np.diff(s) > 0).all()


def test_joint_loss_weighting():
    assert joint_loss(1.0, 2.0) == 3.0  # default weight 1
    assert joint_loss(1.0, 2.0, depth_weight=0.5) == 2.0
