"""Rewards and the QL / CTQL / pCTQL learning algorithms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .dynamics import DEFAULT_INTEGRATOR, INTEGRATORS, PendulumParams
from .metrics import EpisodeRecord, GoalSpec, goal_condition, steady_state_error
from .policies import (
    ACTION_GRID,
    ANGLE_GRID,
    VELOCITY_GRID,
    Hyperparams,
    TutorGain,
    learning_rate,
)

KINDS = ("QL", "CTQL", "pCTQL")
REWARDS = ("distance", "gym")
# The tutor sees what the learner sees (the grid cell's representative state)
# unless "continuous" is chosen.
TUTOR_INPUTS = ("quantized", "continuous")
PAPER_BETAS = (0.9990, 0.9948, 0.9897, 0.9485, 0.8969)

SOURCE_NAMES = {
    kernels.SRC_GREEDY: "rl-greedy",
    kernels.SRC_TUTOR: "tutor",
    kernels.SRC_RANDOM_RL: "random",
    kernels.SRC_RANDOM_TUTOR: "random",
}


@dataclass(frozen=True)
class RewardParams:
    prize_value: float = 5.0
    prize_radius: float = 0.05
    angle_weight: float = 1.0
    velocity_weight: float = 0.1
    torque_weight: float = 0.001
    goal_state: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (self.prize_value > 0 and self.prize_radius > 0):
            raise ValueError("prize value and radius must be positive")
        if min(self.angle_weight, self.velocity_weight, self.torque_weight) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass(frozen=True)
class AlgorithmConfig:
    kind: str = "QL"
    beta: float | None = None
    reward: str = "distance"
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    gain: TutorGain = field(default_factory=TutorGain)
    reward_params: RewardParams = field(default_factory=RewardParams)
    allow_unsafe: bool = False
    tutor_input: str = "quantized"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        if self.reward not in REWARDS:
            raise ValueError(f"unknown reward {self.reward!r}")
        if (self.kind == "pCTQL") != (self.beta is not None):
            raise ValueError("beta must be given for pCTQL and only for pCTQL")
        if self.beta is not None and not 0 <= self.beta <= 1:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.kind == "CTQL" and self.reward != "distance" and not self.allow_unsafe:
            raise ValueError("CTQL's switching rule needs the distance reward (pass allow_unsafe to override)")
        if self.tutor_input not in TUTOR_INPUTS:
            raise ValueError(f"unknown tutor input {self.tutor_input!r}")

    @property
    def label(self) -> str:
        return f"pCTQL-{self.beta:.4f}" if self.kind == "pCTQL" else self.kind

    @property
    def omega(self) -> float | None:
        """Net probability of a tutor action for pCTQL."""
        if self.beta is None:
            return None
        return (1.0 - self.beta) * (1.0 - self.hyperparams.eps_tutor)

    def frozen(self) -> "AlgorithmConfig":
        """Same algorithm with exploration switched off, for evaluation."""
        return replace(self, hyperparams=replace(self.hyperparams, eps_rl=0.0, eps_tutor=0.0))


@dataclass
class EpisodeResult:
    record: EpisodeRecord
    trajectory: np.ndarray
    actions: np.ndarray
    sources: np.ndarray
    rewards: np.ndarray

    @property
    def action_sources(self) -> list:
        return [SOURCE_NAMES[int(s)] for s in self.sources]


def _as_state(state):
    angle, velocity = float(state[0]), float(state[1])
    if not (math.isfinite(angle) and math.isfinite(velocity)):
        raise ValueError(f"non-finite state {state!r}")
    return angle, velocity


def prize(state, params: RewardParams = RewardParams()) -> float:
    angle, velocity = _as_state(state)
    g = params.goal_state
    return params.prize_value if math.hypot(angle - g[0], velocity - g[1]) < params.prize_radius else 0.0


def weighted_distance(state, params: RewardParams = RewardParams()) -> float:
    angle, velocity = _as_state(state)
    g = params.goal_state
    return float(kernels.weighted_distance(angle, velocity, g[0], g[1],
                                           params.angle_weight, params.velocity_weight))


def _reward(kind, prev, curr, torque, params):
    pa, pv = _as_state(prev)
    ca, cv = _as_state(curr)
    g = params.goal_state
    return float(kernels.reward_core(
        kind, pa, pv, ca, cv, float(torque), g[0], g[1],
        params.angle_weight, params.velocity_weight, params.torque_weight,
        params.prize_value, params.prize_radius,
    ))


def reward_distance(prev, curr, torque, params: RewardParams = RewardParams()) -> float:
    """Decrease of the weighted distance to the goal plus the prize at ``curr``."""
    return _reward(kernels.REWARD_DISTANCE, prev, curr, torque, params)


def reward_gym(prev, curr, torque, params: RewardParams = RewardParams()) -> float:
    """Negated quadratic state/torque cost evaluated at ``curr``."""
    return _reward(kernels.REWARD_GYM, prev, curr, torque, params)


_KIND_CODES = {"QL": kernels.KIND_QL, "CTQL": kernels.KIND_CTQL, "pCTQL": kernels.KIND_PCTQL}
_REWARD_CODES = {"distance": kernels.REWARD_DISTANCE, "gym": kernels.REWARD_GYM}


def select_action(config: AlgorithmConfig, q: np.ndarray, state, rng):
    """Pick an action index for ``state``; returns ``(index, source_name)``."""
    angle, velocity = _as_state(state)
    u = rng.random(3)
    hp = config.hyperparams
    ai = kernels.nearest_index(ANGLE_GRID.levels, angle)
    vi = kernels.nearest_index(VELOCITY_GRID.levels, velocity)
    if config.tutor_input == "quantized":
        angle, velocity = ANGLE_GRID.levels[ai], VELOCITY_GRID.levels[vi]
    a, src = kernels.select_action_core(
        _KIND_CODES[config.kind], q, ai, vi,
        angle, velocity, config.gain.k1, config.gain.k2, ACTION_GRID.levels,
        1.0 if config.beta is None else config.beta, hp.eps_rl, hp.eps_tutor,
        u[0], u[1], u[2],
    )
    return int(a), SOURCE_NAMES[int(src)]


def run_episode(config: AlgorithmConfig, q: np.ndarray, env: PendulumParams, x0, episode: int,
                horizon: int, rng, *, learn: bool = True, goal: GoalSpec | None = None,
                integrator: str = DEFAULT_INTEGRATOR, noise_std: float = 0.0) -> EpisodeResult:
    """Simulate one episode of ``horizon`` steps, updating ``q`` in place when ``learn``."""
    angle0, velocity0 = _as_state(x0)
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if goal is None:
        goal = GoalSpec(horizon=horizon, n_minus=min(GoalSpec.n_minus, horizon - 1))
    hp = config.hyperparams
    rp = config.reward_params
    uniforms = rng.random((horizon, 3))
    use_noise = noise_std > 0
    noise = rng.normal(0.0, noise_std, (horizon, 2)) if use_noise else np.zeros((1, 2))

    trajectory = np.empty((horizon + 1, 2))
    actions = np.empty(horizon, dtype=np.int64)
    sources = np.empty(horizon, dtype=np.int8)
    rewards = np.empty(horizon)
    kernels.episode_kernel(
        q, ANGLE_GRID.levels, VELOCITY_GRID.levels, ACTION_GRID.levels,
        _KIND_CODES[config.kind], 1.0 if config.beta is None else float(config.beta),
        hp.eps_rl, hp.eps_tutor, config.gain.k1, config.gain.k2,
        _REWARD_CODES[config.reward], float(rp.goal_state[0]), float(rp.goal_state[1]),
        rp.angle_weight, rp.velocity_weight, rp.torque_weight, rp.prize_value, rp.prize_radius,
        config.tutor_input == "quantized",
        env.gravity_gain, 1.0 / env.inertia, env.sample_time, integrator == "semi-implicit",
        learning_rate(episode, hp.lr_scale), hp.discount, learn,
        angle0, velocity0, uniforms, noise, use_noise,
        trajectory, actions, sources, rewards,
    )

    met, k_g = goal_condition(trajectory, goal)
    record = EpisodeRecord(
        episode=episode,
        cumulative_reward=float(rewards.sum()),
        tutor_fraction=float(np.count_nonzero(
            (sources == kernels.SRC_TUTOR) | (sources == kernels.SRC_RANDOM_TUTOR)) / horizon),
        goal_met=met,
        settling_time=k_g,
        steady_state_error=steady_state_error(trajectory, k_g, goal) if met else None,
    )
    return EpisodeResult(record, trajectory, actions, sources, rewards)
