"""Control-tutored Q-learning on the discretized inverted pendulum."""

__version__ = "0.1.0"

from .algorithms import AlgorithmConfig, RewardParams, run_episode, select_action  # noqa: E402
from .dynamics import PendulumParams, linearized_model, perturb_params, step  # noqa: E402
from .experiment import BenchmarkPlan, RobustnessPlan, run_benchmark, run_robustness, welch_t_test  # noqa: E402
from .metrics import GoalSpec, SessionLog  # noqa: E402
