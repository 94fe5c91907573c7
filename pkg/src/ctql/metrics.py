"""Learning and control metrics.

Episodes are 1-indexed; time steps run 0..N so a trajectory has N + 1 states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STREAK = 30  # goal must hold on episodes E_t - 30 .. E_t


@dataclass(frozen=True)
class GoalSpec:
    goal_state: tuple = (0.0, 0.0)
    eta: float = 0.05 * math.hypot(math.pi, 8.0)
    n_minus: int = 300
    horizon: int = 400

    def __post_init__(self):
        if not 0 < self.n_minus < self.horizon:
            raise ValueError(f"need 0 < n_minus < horizon, got {self.n_minus}, {self.horizon}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")


def goal_distance(trajectory, goal_state=(0.0, 0.0)) -> np.ndarray:
    x = np.asarray(trajectory, dtype=np.float64)
    return np.hypot(x[:, 0] - goal_state[0], x[:, 1] - goal_state[1])


def _check_length(trajectory, spec: GoalSpec):
    if len(trajectory) != spec.horizon + 1:
        raise ValueError(f"trajectory has {len(trajectory)} states, expected {spec.horizon + 1}")


def goal_condition(trajectory, spec: GoalSpec = GoalSpec()):
    """Return ``(satisfied, k_bar)`` where ``k_bar`` is the first step from which
    the state stays within ``eta`` of the goal through the horizon."""
    _check_length(trajectory, spec)
    outside = np.flatnonzero(goal_distance(trajectory, spec.goal_state) > spec.eta)
    k_bar = 0 if outside.size == 0 else int(outside[-1]) + 1
    if k_bar <= spec.n_minus:
        return True, k_bar
    return False, None


def settling_time(trajectory, spec: GoalSpec = GoalSpec()):
    return goal_condition(trajectory, spec)[1]


def steady_state_error(trajectory, k_g: int, spec: GoalSpec = GoalSpec()) -> float:
    """Mean distance to the goal over steps ``k_g..N``."""
    _check_length(trajectory, spec)
    if not 0 <= k_g <= spec.horizon:
        raise ValueError(f"settling time {k_g} outside [0, {spec.horizon}]")
    return float(np.mean(goal_distance(trajectory, spec.goal_state)[k_g:]))


def avg_cumulative_reward(returns) -> float:
    returns = np.asarray(returns, dtype=np.float64)
    if returns.size == 0:
        raise ValueError("empty session log")
    return float(returns.mean())


def terminal_episode(goal_flags, streak: int = STREAK):
    """Smallest 1-indexed episode ending ``streak + 1`` consecutive goal successes."""
    flags = np.asarray(goal_flags, dtype=bool)
    width = streak + 1
    if flags.size < width:
        return None
    csum = np.concatenate([[0], np.cumsum(flags, dtype=np.int64)])
    full = np.flatnonzero(csum[width:] - csum[:-width] == width)
    if full.size == 0:
        return None
    return int(full[0]) + width


def avg_reward_after_terminal(returns, e_t: int) -> float:
    """Mean cumulative reward over episodes ``e_t..E``."""
    returns = np.asarray(returns, dtype=np.float64)
    if not 1 <= e_t <= returns.size:
        raise ValueError(f"terminal episode {e_t} outside [1, {returns.size}]")
    return float(returns[e_t - 1:].mean())


@dataclass
class EpisodeRecord:
    episode: int
    cumulative_reward: float
    tutor_fraction: float
    goal_met: bool
    settling_time: int | None
    steady_state_error: float | None


@dataclass
class SessionLog:
    """Column-oriented log of one session (episodes 1..E).

    Absent settling times are stored as -1 and absent steady-state errors
    as NaN.
    """

    cumulative_reward: np.ndarray
    tutor_fraction: np.ndarray
    goal_met: np.ndarray
    settling_time: np.ndarray
    steady_state_error: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, n_episodes: int, **meta) -> "SessionLog":
        return cls(
            cumulative_reward=np.zeros(n_episodes),
            tutor_fraction=np.zeros(n_episodes),
            goal_met=np.zeros(n_episodes, dtype=bool),
            settling_time=np.full(n_episodes, -1, dtype=np.int64),
            steady_state_error=np.full(n_episodes, np.nan),
            meta=dict(meta),
        )

    @classmethod
    def from_records(cls, records, **meta) -> "SessionLog":
        records = list(records)
        log = cls.empty(len(records), **meta)
        for i, rec in enumerate(records):
            if rec.episode != i + 1:
                raise ValueError("episode indices must be contiguous from 1")
            log.set(rec)
        return log

    def __len__(self):
        return self.cumulative_reward.size

    def set(self, rec: EpisodeRecord) -> None:
        i = rec.episode - 1
        self.cumulative_reward[i] = rec.cumulative_reward
        self.tutor_fraction[i] = rec.tutor_fraction
        self.goal_met[i] = rec.goal_met
        self.settling_time[i] = -1 if rec.settling_time is None else rec.settling_time
        self.steady_state_error[i] = np.nan if rec.steady_state_error is None else rec.steady_state_error

    def record(self, episode: int) -> EpisodeRecord:
        i = episode - 1
        k = int(self.settling_time[i])
        return EpisodeRecord(
            episode=episode,
            cumulative_reward=float(self.cumulative_reward[i]),
            tutor_fraction=float(self.tutor_fraction[i]),
            goal_met=bool(self.goal_met[i]),
            settling_time=None if k < 0 else k,
            steady_state_error=None if k < 0 else float(self.steady_state_error[i]),
        )

    def records(self):
        for e in range(1, len(self) + 1):
            yield self.record(e)

    def avg_cumulative_reward(self) -> float:
        return avg_cumulative_reward(self.cumulative_reward)

    def terminal_episode(self):
        return terminal_episode(self.goal_met)

    def avg_reward_after_terminal(self):
        e_t = self.terminal_episode()
        return None if e_t is None else avg_reward_after_terminal(self.cumulative_reward, e_t)
