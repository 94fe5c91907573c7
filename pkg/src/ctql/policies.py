"""Action-selection primitives and the tabular Q update.

The Q-table is a plain ``float64`` array of shape
``(n_angle, n_velocity, n_action)`` addressed by quantized state indices.
All argmax/argmin ties resolve to the lowest index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import jit
from .discretization import (
    Grid,
    build_action_grid,
    build_angle_grid,
    build_velocity_grid,
    nearest_index,
)

ANGLE_GRID = build_angle_grid()
VELOCITY_GRID = build_velocity_grid()
ACTION_GRID = build_action_grid()

QTABLE_SHAPE = (len(ANGLE_GRID), len(VELOCITY_GRID), len(ACTION_GRID))


@dataclass(frozen=True)
class TutorGain:
    k1: float = 5.83
    k2: float = 1.83

    def __post_init__(self):
        if not (math.isfinite(self.k1) and math.isfinite(self.k2)):
            raise ValueError("tutor gains must be finite")


@dataclass(frozen=True)
class Hyperparams:
    discount: float = 0.97
    eps_tutor: float = 0.03
    eps_rl: float = 0.03
    lr_scale: float = 1000.0

    def __post_init__(self):
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must be in (0, 1], got {self.discount}")
        for name in ("eps_tutor", "eps_rl"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
        if not self.lr_scale > 0:
            raise ValueError("lr_scale must be positive")


def new_qtable(shape=QTABLE_SHAPE) -> np.ndarray:
    return np.zeros(shape, dtype=np.float64)


@jit
def greedy_index(row):
    best = 0
    best_value = row[0]
    for i in range(1, row.shape[0]):
        if row[i] > best_value:
            best_value = row[i]
            best = i
    return best


@jit
def row_max(row):
    m = row[0]
    for i in range(1, row.shape[0]):
        if row[i] > m:
            m = row[i]
    return m


@jit
def q_update_inplace(q, ai, vi, a, next_ai, next_vi, reward, alpha, gamma):
    target = reward + gamma * row_max(q[next_ai, next_vi])
    q[ai, vi, a] = (1.0 - alpha) * q[ai, vi, a] + alpha * target


def tutor_continuous(state, gain: TutorGain) -> float:
    """Unsaturated linear feedback ``-K x``."""
    return -(gain.k1 * float(state[0]) + gain.k2 * float(state[1]))


def tutor_action(state, gain: TutorGain, action_grid: Grid = ACTION_GRID) -> int:
    """Feasible action closest to the linear feedback torque."""
    return int(nearest_index(action_grid.levels, tutor_continuous(state, gain)))


def tutor_policy(state, gain: TutorGain, eps_tutor: float, rng, action_grid: Grid = ACTION_GRID) -> int:
    if rng.random() < 1.0 - eps_tutor:
        return tutor_action(state, gain, action_grid)
    return int(rng.integers(len(action_grid)))


def greedy_action(q: np.ndarray, s) -> int:
    return int(greedy_index(q[s[0], s[1]]))


def rl_policy(q: np.ndarray, s, eps_rl: float, rng) -> int:
    if rng.random() < 1.0 - eps_rl:
        return greedy_action(q, s)
    return int(rng.integers(q.shape[2]))


def q_update(q: np.ndarray, s, a: int, s_next, reward: float, alpha: float, gamma: float) -> None:
    """Blend ``Q(s, a)`` toward ``reward + gamma * max_u Q(s_next, u)`` in place."""
    if not math.isfinite(reward):
        raise ValueError(f"non-finite reward {reward!r}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    q_update_inplace(q, s[0], s[1], a, s_next[0], s_next[1], float(reward), float(alpha), float(gamma))


def learning_rate(episode: int, scale: float = 1000.0) -> float:
    """Decaying step size ``(1 + e / scale) ** -0.5`` for 1-indexed episode ``e``."""
    if episode < 1:
        raise ValueError(f"episodes are 1-indexed, got {episode}")
    return (1.0 + episode / scale) ** -0.5
