"""Feedback-policy weight estimation from (state, action) pairs."""

import numpy as np
import pytest

from oirl.errors import DivergenceError
from oirl.features import FeatureBasis
from oirl.policy_estimator import PolicyEstimator

K_TRUE = np.array([[0.0916079783099616, 0.2302163765760962]])


def _basis():
    return FeatureBasis.from_names(2, 1, "quadratic", "squares", "linear")


def _filled_estimator(n_samples=30, seed=2):
    """Estimator whose stack holds optimal pairs u = -K_TRUE x."""
    rng = np.random.default_rng(seed)
    est = PolicyEstimator(_basis())
    for i in range(n_samples):
        x = rng.uniform(-1.0, 1.0, 2)
        est.record_sample(x, -(K_TRUE @ x), t=0.05 * i)
    return est


def test_zero_state_samples_are_rejected():
    est = PolicyEstimator(_basis())
    assert not est.record_sample(np.zeros(2), np.zeros(1), t=0.0)
    assert len(est.stack) == 0
    assert est.record_sample(np.array([0.1, 0.0]), np.array([0.5]), t=0.0)


def test_batch_solution_is_a_fixed_point():
    est = _filled_estimator()
    est.weights = K_TRUE.T.copy()
    before = est.weights.copy()
    est.update_weights(0.005)
    assert np.max(np.abs(est.weights - before)) < 1e-14


def test_weights_converge_to_the_batch_solution():
    est = _filled_estimator()
    for _ in range(40000):
        est.update_weights(0.005)
        est.update_gain(0.005)
    assert np.max(np.abs(est.weights - K_TRUE.T)) < 1e-8


def test_gain_converges_to_forgetting_scaled_inverse_normal():
    est = _filled_estimator()
    for _ in range(40000):
        est.update_weights(0.005)
        est.update_gain(0.005)
    target = (est.beta / est.alpha) * np.linalg.inv(est.stack.normal_matrix())
    assert np.max(np.abs(est.gamma - target)) < 1e-6
    assert est.gain_resets == 0


def test_empty_stack_gain_grows_until_reset():
    est = PolicyEstimator(_basis(), beta=2.0, gamma0=1.0)
    est.update_gain(0.005)
    np.testing.assert_allclose(est.gamma, 1.01 * np.eye(2), atol=1e-15)
    resets = 0
    for _ in range(2000):  # 1.01^k passes 1e7 near k = 1620
        resets += est.update_gain(0.005)
    assert resets >= 1
    assert est.gain_resets == resets
    assert np.max(est.gamma) < 1e7


def test_query_is_linear_in_the_state():
    est = PolicyEstimator(_basis())
    est.weights = K_TRUE.T.copy()
    x = np.array([0.4, -0.3])
    np.testing.assert_allclose(est.query(x), -(K_TRUE @ x))
    np.testing.assert_allclose(est.query(2.0 * x), 2.0 * est.query(x))
    np.testing.assert_allclose(est.query(np.zeros(2)), np.zeros(1))


def test_snapshot_is_a_copy():
    est = _filled_estimator()
    snap = est.snapshot(t=1.0)
    snap.weights[0, 0] = 77.0
    assert est.weights[0, 0] != 77.0
    assert snap.t == 1.0


def test_non_finite_update_raises():
    est = _filled_estimator()
    est.weights = np.full((2, 1), 1e308)
    est.gamma = 1e308 * np.eye(2)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError):
            est.update_weights(0.005)
