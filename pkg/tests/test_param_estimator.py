"""Windowed-integral regression and the drift-parameter estimator."""

import numpy as np
import pytest

from oirl.dynamics import eval_dynamics, linear_uncertain_plant, step_rk4
from oirl.oracle import solve_are
from oirl.param_estimator import ThetaEstimator, accumulate_window

A0 = np.array([[0.0, 1.0], [0.0, 0.0]])
B0 = np.zeros((2, 1))
THETA = np.array([[0.0, -0.5], [0.0, -0.5], [0.0, 1.0]])


def _plant():
    return linear_uncertain_plant(A0, B0, THETA)


def test_window_regression_on_scalar_exponential():
    """xdot = theta * x with zero nominal: b / integral(x) recovers theta."""
    theta = -0.5
    dt = 0.005
    times = [k * dt for k in range(51)]
    states = [np.array([np.exp(theta * t)]) for t in times]
    controls = [np.zeros(0) for _ in times]
    y, b = accumulate_window(lambda x, u: np.zeros(1),
                             lambda x, u: x.copy(), times, states, controls)
    assert abs(b[0] / y[0] - theta) < 1e-4


def test_window_regression_at_equilibrium_is_degenerate():
    times = [0.0, 0.005, 0.01]
    states = [np.zeros(1)] * 3
    controls = [np.zeros(0)] * 3
    y, b = accumulate_window(lambda x, u: np.zeros(1),
                             lambda x, u: x.copy(), times, states, controls)
    assert np.linalg.norm(y) == 0.0
    assert np.linalg.norm(b) == 0.0


def test_window_regression_needs_two_samples():
    with pytest.raises(ValueError):
        accumulate_window(lambda x, u: np.zeros(1), lambda x, u: x.copy(),
                          [0.0], [np.zeros(1)], [np.zeros(0)])


def _closed_loop_rollout(duration, dt=0.005):
    """Simulate the tracking plant under its stabilizing LQR feedback."""
    dyn = _plant()
    a = A0 + THETA[:2].T
    b = B0 + THETA[2:].T
    k_gain = solve_are(a, b, np.eye(2), np.array([[10.0]])).gain
    a_d = np.array([[0.0, 1.0], [-2.0, 0.0]])
    f_gain = np.array([[-1.5, 0.5]])
    x = np.zeros(2)
    xd = np.array([1.0, 0.0])
    out = []
    steps = int(round(duration / dt))
    for k in range(steps + 1):
        t = k * dt
        u = f_gain @ xd - k_gain @ (x - xd)
        out.append((t, x.copy(), u.copy()))
        x = step_rk4(dyn, x, u, dt)
        xd = np.asarray([xd[0] * np.cos(np.sqrt(2) * dt)
                         + xd[1] * np.sin(np.sqrt(2) * dt) / np.sqrt(2),
                         -np.sqrt(2) * xd[0] * np.sin(np.sqrt(2) * dt)
                         + xd[1] * np.cos(np.sqrt(2) * dt)])
    return dyn, out


def test_stacked_windows_are_consistent_with_the_true_parameters():
    """Every stored (Y, b) pair must satisfy b ~= theta_true^T Y closely."""
    dyn, rollout = _closed_loop_rollout(6.0)
    est = ThetaEstimator(dyn)
    for t, x, u in rollout:
        est.observe(t, x, u)
    assert len(est.stack) > 20
    residual = est.stack.targets() - est.stack.regressor() @ THETA
    assert np.max(np.abs(residual)) < 1e-6


def test_estimate_converges_on_frozen_stack():
    dyn, rollout = _closed_loop_rollout(6.0)
    est = ThetaEstimator(dyn)
    for t, x, u in rollout:
        est.observe(t, x, u)
    for _ in range(40000):
        est.update(0.005)
    s = est.stack.normal_matrix()
    c = est.stack.cross_matrix()
    batch = np.linalg.solve(s, c)
    assert np.max(np.abs(est.theta_hat - batch)) < 1e-8
    # and the batch solution itself sits next to the truth
    assert np.max(np.abs(batch - THETA)) < 1e-5


def test_empty_stack_grows_gain_geometrically():
    est = ThetaEstimator(_plant(), beta=2.0, gamma0=1.0)
    est.update(0.005)
    np.testing.assert_allclose(est.gamma, 1.01 * np.eye(3), atol=1e-15)


def test_estimate_respects_projection_box():
    dyn = _plant()
    est = ThetaEstimator(dyn, box=(-2.0, 2.0))
    # rows demanding theta far outside the box
    for i in range(3):
        row = np.zeros(3)
        row[i] = 1.0
        est.stack.try_insert(row, 10.0 * np.ones(2), t=float(i))
    for _ in range(5000):
        est.update(0.005)
    assert np.max(est.theta_hat) <= 2.0 + 1e-12
    assert np.min(est.theta_hat) >= -2.0 - 1e-12


def test_zero_windows_are_not_banked():
    dyn = _plant()
    est = ThetaEstimator(dyn)
    accepted = [est.observe(k * 0.005, np.zeros(2), np.zeros(1))
                for k in range(200)]
    assert not any(accepted)
    assert len(est.stack) == 0


def test_generation_counts_significant_revisions():
    dyn, rollout = _closed_loop_rollout(3.0)
    est = ThetaEstimator(dyn)
    generations = []
    for t, x, u in rollout:
        est.observe(t, x, u)
        est.update(0.005)
        generations.append(est.generation)
    assert generations[-1] >= 1
    assert all(g2 >= g1 for g1, g2 in zip(generations, generations[1:]))
    # snapshot carries the counter
    snap = est.snapshot()
    assert snap.generation == est.generation
    snap.theta_hat[0, 0] = 99.0
    assert est.theta_hat[0, 0] != 99.0
