"""Reward and value recovery from an estimated policy, via inverse Bellman
residuals over queried state-action pairs.

For a reward r(x, u) = W_Q^T sigma_Q(x) + u^T R u with R diagonal and a value
function V(x) = W_V^T sigma_V(x), optimal behavior makes two residuals vanish:

  Bellman:       W_V^T grad(sigma_V)(x) xdot + W_Q^T sigma_Q(x) + W_R^T (u*u) = 0
  stationarity:  grad(sigma_V)(x)^T W_V paired against each input channel,
                 2 r_j u_j + (dV/dx) (d xdot / d u_j) = 0

Each sampled pair (x_i, u_i) therefore contributes 1 + m linear rows in the
unknown weights. The reward is only identifiable up to scale, so the first
control penalty r_1 is fixed by convention and moves to the row offsets.
Rows are built from the current drift-parameter estimate, banked in a history
stack tagged with that estimate's generation, and purged when fresher
estimates make old rows stale.
"""

from __future__ import annotations

import numpy as np

from .dynamics import AffineDynamics, eval_dynamics, input_jacobian
from .errors import DivergenceError
from .features import FeatureBasis
from .history import HistoryStack
from .param_estimator import ThetaSnapshot
from .policy_estimator import PolicySnapshot
from .rls import gain_step

Matrix = np.ndarray
Vector = np.ndarray


def inverse_bellman_error(basis: FeatureBasis, dyn: AffineDynamics, x: Vector,
                          u: Vector, weights: Vector, theta_hat: Matrix) -> float:
    """Bellman residual for a full weight vector [W_V; W_Q; W_R] (r_1 included)."""
    p, l, m = basis.value_dim, basis.reward_dim, basis.input_dim
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (p + l + m,):
        raise ValueError(f"weights must have length {p + l + m}, got {weights.shape}")
    w_v, w_q, w_r = weights[:p], weights[p:p + l], weights[p + l:]
    xdot = eval_dynamics(dyn, x, u, theta_hat)
    return float(w_v @ (basis.value_gradient(x) @ xdot)
                 + w_q @ basis.reward_features(x)
                 + w_r @ basis.control_squares(u))


def build_row_block(basis: FeatureBasis, dyn: AffineDynamics, x: Vector,
                    u_hat: Vector, theta_hat: Matrix,
                    r1: float) -> tuple[Matrix, Vector]:
    """Regressor rows and offsets contributed by one (x, u_hat) sample.

    Returns (rows, offsets) with rows of shape (1 + m, P + L + m - 1) over the
    unknowns [W_V; W_Q; W_R minus its first entry] and offsets carrying the
    anchored r1 terms, so that rows @ W_true + offsets = 0 at exact data.
    """
    p, l, m = basis.value_dim, basis.reward_dim, basis.input_dim
    u_hat = np.asarray(u_hat, dtype=float)
    grad_v = basis.value_gradient(x)                       # (P, n)
    xdot = eval_dynamics(dyn, x, u_hat, theta_hat)
    u_sq = basis.control_squares(u_hat)
    rows = np.zeros((1 + m, p + l + m - 1))
    offsets = np.zeros(1 + m)
    rows[0, :p] = grad_v @ xdot
    rows[0, p:p + l] = basis.reward_features(x)
    rows[0, p + l:] = u_sq[1:]
    offsets[0] = r1 * u_sq[0]
    # stationarity rows: dV/dx * d(xdot)/du_j + 2 r_j u_j = 0 per channel
    g = grad_v @ input_jacobian(dyn, x, theta_hat)         # (P, m)
    for j in range(m):
        rows[1 + j, :p] = g[:, j]
        if j == 0:
            offsets[1] = 2.0 * r1 * u_hat[0]
        else:
            rows[1 + j, p + l + j - 1] = 2.0 * u_hat[j]
    return rows, offsets


class RewardEstimator:
    """Maintains the queried-sample stack and the weight/gain update laws.

    The weight vector has length P + L + m - 1, partitioned as value weights,
    state-reward weights, and the diagonal control penalties beyond the
    anchored r1.
    """

    def __init__(self, basis: FeatureBasis, dyn: AffineDynamics,
                 r1: float = 10.0, stack_size: int = 50,
                 alpha: float = 0.01 / 50, beta: float = 0.5,
                 dwell: float = 2.0, query_box=None, query_seed: int = 0,
                 gamma0: float = 1.0, gamma_floor: float = 1e-9,
                 gamma_ceiling: float = 1e7):
        if r1 <= 0.0:
            raise ValueError("the scale anchor r1 must be positive")
        self.basis = basis
        self.dyn = dyn
        self.r1 = float(r1)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.dwell = float(dwell)
        self.gamma_floor = float(gamma_floor)
        self.gamma_ceiling = float(gamma_ceiling)
        n, m = dyn.state_dim, basis.input_dim
        if query_box is None:
            query_box = [(-1.0, 1.0)] * n
        self.query_box = np.asarray(query_box, dtype=float).reshape(n, 2)
        self.rng = np.random.default_rng(query_seed)
        self.dim = basis.value_dim + basis.reward_dim + m - 1
        self.weights = np.zeros(self.dim)
        self._gamma0 = gamma0 * np.eye(self.dim)
        self.gamma = self._gamma0.copy()
        self.stack = HistoryStack(stack_size, row_dim=self.dim,
                                  block_rows=1 + m, target_dim=1)
        self.last_purge = 0.0
        self.purge_times: list[float] = []
        self.gain_resets = 0
        self.last_gain_reset = False
        self.gamma_eig_range = (gamma0, gamma0)

    # -- weight partitions ----------------------------------------------------

    @property
    def value_weights(self) -> Vector:
        return self.weights[:self.basis.value_dim].copy()

    @property
    def reward_weights(self) -> Vector:
        p = self.basis.value_dim
        return self.weights[p:p + self.basis.reward_dim].copy()

    @property
    def control_weights_rest(self) -> Vector:
        return self.weights[self.basis.value_dim + self.basis.reward_dim:].copy()

    def full_weights(self) -> Vector:
        """[W_V; W_Q; W_R] with the anchored r1 re-inserted."""
        p, l = self.basis.value_dim, self.basis.reward_dim
        return np.concatenate([self.weights[:p + l], [self.r1],
                               self.weights[p + l:]])

    # -- sample collection -----------------------------------------------------

    def draw_query_state(self) -> Vector:
        return self.rng.uniform(self.query_box[:, 0], self.query_box[:, 1])

    def _offer(self, x: Vector, u_hat: Vector, theta: ThetaSnapshot,
               t: float) -> bool:
        rows, offsets = build_row_block(self.basis, self.dyn, x, u_hat,
                                        theta.theta_hat, self.r1)
        if np.linalg.norm(rows) < 1e-12:
            return False        # degenerate sample, cannot raise lambda_min
        return self.stack.try_insert(rows, offsets, t, tag=theta.generation)

    def generate_query(self, policy: PolicySnapshot, theta: ThetaSnapshot,
                       t: float) -> bool:
        """Draw x_i from the query box, evaluate the estimated policy, bank rows."""
        x_i = self.draw_query_state()
        u_hat = -(policy.weights.T @ self.basis.policy_features(x_i))
        return self._offer(x_i, u_hat, theta, t)

    def collect_trajectory_sample(self, x: Vector, u: Vector,
                                  theta: ThetaSnapshot, t: float) -> bool:
        """No-querying variant: bank rows built from an observed (x, u) pair."""
        return self._offer(np.asarray(x, dtype=float),
                           np.asarray(u, dtype=float), theta, t)

    # -- updates ---------------------------------------------------------------

    def update_weights(self, dt: float) -> None:
        s = self.stack.normal_matrix()
        c = self.stack.cross_matrix()[:, 0]     # Sigma^T offsets
        w = self.weights + dt * self.alpha * (self.gamma @ (-s @ self.weights - c))
        if not np.all(np.isfinite(w)):
            raise DivergenceError("reward weight update went non-finite")
        self.weights = w

    def update_gain(self, dt: float) -> bool:
        s = self.stack.normal_matrix()
        self.gamma, reset, lam_lo, lam_hi = gain_step(
            self.gamma, s, self.alpha, self.beta, dt,
            self.gamma_floor, self.gamma_ceiling, self._gamma0)
        self.last_gain_reset = reset
        if reset:
            self.gain_resets += 1
        self.gamma_eig_range = (lam_lo, lam_hi)
        return reset

    # -- purging ---------------------------------------------------------------

    def schedule_purge(self, t: float, theta_generation: int) -> bool:
        """Purge the stack when dwell time has passed AND stale rows exist."""
        oldest = self.stack.oldest_tag()
        if oldest is None or theta_generation <= oldest:
            return False
        if not self.stack.purge(t, self.dwell, self.last_purge):
            return False
        self.last_purge = t
        self.purge_times.append(t)
        return True

    # -- outputs ---------------------------------------------------------------

    def assemble_reward(self):
        """(Q_hat, R_hat, V_hat): state-reward map, diagonal R, value map."""
        w_q = self.reward_weights
        w_v = self.value_weights
        r_hat = np.diag(np.concatenate([[self.r1], self.control_weights_rest]))
        basis = self.basis

        def q_hat(x):
            return float(w_q @ basis.reward_features(x))

        def v_hat(x):
            return float(w_v @ basis.value_features(x))

        return q_hat, r_hat, v_hat
