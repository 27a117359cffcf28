"""Online inverse reinforcement learning with model-based data querying.

Observes an optimal tracking agent, concurrently estimates the plant's
unknown drift parameters, the agent's feedback policy, and the reward and
value function weights it optimizes. When the observed trajectory stops being
informative, the estimated model and policy are queried at artificial states
to keep the reward estimator's history stack rich.
"""

from .dynamics import (AffineDynamics, TrackingScenario, eval_dynamics,
                       input_jacobian, linear_uncertain_plant, rk4, step_rk4,
                       tracking_error)
from .errors import (ConfigError, DimensionError, DivergenceError,
                     RiccatiConvergenceError, UnstabilizableError,
                     UnsupportedBasisError)
from .features import BasisFamily, FeatureBasis, get_family, register_family
from .harness import (MetricsRecord, RunResult, ScenarioConfig, ablate,
                      compare_to_oracle, default_tracking_config, emit_csv,
                      load_config, run_scenario, save_config)
from .history import HistoryStack
from .irl_engine import RewardEstimator, build_row_block, inverse_bellman_error
from .oracle import LqrSolution, ideal_policy_weights, solve_are
from .param_estimator import ThetaEstimator, ThetaSnapshot, accumulate_window
from .policy_estimator import PolicyEstimator, PolicySnapshot

__version__ = "0.1.0"

__all__ = [
    "AffineDynamics", "TrackingScenario", "eval_dynamics", "input_jacobian",
    "linear_uncertain_plant", "rk4", "step_rk4", "tracking_error",
    "ConfigError", "DimensionError", "DivergenceError",
    "RiccatiConvergenceError", "UnstabilizableError", "UnsupportedBasisError",
    "BasisFamily", "FeatureBasis", "get_family", "register_family",
    "MetricsRecord", "RunResult", "ScenarioConfig", "ablate",
    "compare_to_oracle", "default_tracking_config", "emit_csv", "load_config",
    "run_scenario", "save_config",
    "HistoryStack",
    "RewardEstimator", "build_row_block", "inverse_bellman_error",
    "LqrSolution", "ideal_policy_weights", "solve_are",
    "ThetaEstimator", "ThetaSnapshot", "accumulate_window",
    "PolicyEstimator", "PolicySnapshot",
]
