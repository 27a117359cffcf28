"""Drift-parameter estimation via integral concurrent learning.

The unknown theta (p x n) enters the plant as xdot = f0(x,u) + theta^T
sigma(x,u). Integrating over a sliding window [t - window, t] gives

    x(t) - x(t - window) - int f0 dt  =  theta^T int sigma dt

so each window yields a linear regressor/target pair without differentiating
state measurements. Pairs are banked in a history stack and theta_hat follows
a recursive least-squares law with forgetting, projected onto a known box.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import AffineDynamics
from .history import HistoryStack
from .rls import gain_step

Matrix = np.ndarray
Vector = np.ndarray


def accumulate_window(nominal, features, times, states, controls) -> tuple[Vector, Vector]:
    """Trapezoidal window integrals for one regressor/target pair.

    times/states/controls are aligned samples spanning the window; the
    control is treated as held over each subinterval (zero-order hold).
    Returns (Y, b) with Y = int sigma dt (p,) and
    b = x(end) - x(start) - int f0 dt (n,).
    """
    times = np.asarray(times, dtype=float)
    k = times.shape[0]
    if k < 2:
        raise ValueError("integration window needs at least 2 samples")
    y = None
    f_int = None
    for i in range(k - 1):
        h = times[i + 1] - times[i]
        x_a, x_b = states[i], states[i + 1]
        u_held = controls[i]
        sig = 0.5 * h * (features(x_a, u_held) + features(x_b, u_held))
        nom = 0.5 * h * (nominal(x_a, u_held) + nominal(x_b, u_held))
        y = sig if y is None else y + sig
        f_int = nom if f_int is None else f_int + nom
    b = np.asarray(states[-1], dtype=float) - np.asarray(states[0], dtype=float) - f_int
    return y, b


@dataclass(frozen=True)
class ThetaSnapshot:
    """Immutable (theta_hat, generation) handoff for the other estimators."""
    theta_hat: Matrix
    generation: int


class ThetaEstimator:
    """Windowed-integral concurrent-learning estimator for theta.

    `generation` counts significant estimate revisions: it increments whenever
    theta_hat has drifted more than `revision_threshold` (Frobenius) from the
    estimate at the previous increment. Downstream consumers use it to decide
    when rows built from older estimates have gone stale.
    """

    def __init__(self, dyn: AffineDynamics, stack_size: int = 50,
                 window: float = 0.25, offer_period: float = 0.05,
                 alpha: float = 1.0, beta: float = 2.0, gamma0: float = 1.0,
                 box: tuple[float, float] = (-2.0, 2.0),
                 revision_threshold: float = 0.05,
                 gamma_floor: float = 1e-9, gamma_ceiling: float = 1e7):
        p, n = dyn.param_dim, dyn.state_dim
        self.dyn = dyn
        self.window = float(window)
        self.offer_period = float(offer_period)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.box_lo, self.box_hi = float(box[0]), float(box[1])
        if not self.box_lo < self.box_hi:
            raise ValueError("projection box must have lo < hi")
        self.revision_threshold = float(revision_threshold)
        self.gamma_floor = float(gamma_floor)
        self.gamma_ceiling = float(gamma_ceiling)
        center = 0.5 * (self.box_lo + self.box_hi)
        self.theta_hat = np.full((p, n), center)
        self._gamma0 = gamma0 * np.eye(p)
        self.gamma = self._gamma0.copy()
        self.stack = HistoryStack(stack_size, row_dim=p, block_rows=1, target_dim=n)
        self.generation = 0
        self._anchor = self.theta_hat.copy()
        self._buffer: deque = deque()
        self._last_offer = -np.inf
        self.gain_resets = 0
        self.last_gain_reset = False
        self.gamma_eig_range = (gamma0, gamma0)

    def snapshot(self) -> ThetaSnapshot:
        return ThetaSnapshot(self.theta_hat.copy(), self.generation)

    def window_pair(self) -> tuple[Vector, Vector]:
        """(Y, b) over the currently buffered window."""
        times = [s[0] for s in self._buffer]
        states = [s[1] for s in self._buffer]
        controls = [s[2] for s in self._buffer]
        return accumulate_window(self.dyn.nominal, self.dyn.features,
                                 times, states, controls)

    def observe(self, t: float, x: Vector, u: Vector) -> bool:
        """Buffer one sample; offer a window pair to the stack when due.

        Returns whether the stack changed. Zero-signal windows are never
        offered since they cannot raise the stack's rank metric.
        """
        self._buffer.append((float(t), np.asarray(x, dtype=float).copy(),
                             np.asarray(u, dtype=float).copy()))
        while self._buffer[0][0] < t - self.window - 1e-9:
            self._buffer.popleft()
        spans = self._buffer[0][0] <= t - self.window + 1e-9
        if not spans or t - self._last_offer < self.offer_period - 1e-9:
            return False
        y, b = self.window_pair()
        self._last_offer = t
        if np.linalg.norm(y) < 1e-12:
            return False
        return self.stack.try_insert(y, b, t, tag=self.generation)

    def update(self, dt: float) -> None:
        """One Euler step of the RLS law, projection, and generation logic."""
        s = self.stack.normal_matrix()
        c = self.stack.cross_matrix()
        self.theta_hat = self.theta_hat + dt * self.alpha * (
            self.gamma @ (c - s @ self.theta_hat))
        np.clip(self.theta_hat, self.box_lo, self.box_hi, out=self.theta_hat)
        self.gamma, reset, lam_lo, lam_hi = gain_step(
            self.gamma, s, self.alpha, self.beta, dt,
            self.gamma_floor, self.gamma_ceiling, self._gamma0)
        self.last_gain_reset = reset
        if reset:
            self.gain_resets += 1
        self.gamma_eig_range = (lam_lo, lam_hi)
        if np.linalg.norm(self.theta_hat - self._anchor) > self.revision_threshold:
            self.generation += 1
            self._anchor = self.theta_hat.copy()
