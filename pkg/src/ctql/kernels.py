"""Per-step inner loop of a learning or evaluation episode.

Randomness is supplied by the caller as a ``(N, 3)`` array of uniforms per
episode (switch draw, exploration draw, random-action draw), so the compiled
and interpreted paths consume identical streams and produce identical
results.
"""
import math

from ._jit import jit
from .discretization import nearest_index
from .dynamics import MAX_SPEED, euler_step, wrap_angle
from .policies import greedy_index, q_update_inplace, row_max

KIND_QL, KIND_CTQL, KIND_PCTQL = 0, 1, 2
REWARD_DISTANCE, REWARD_GYM = 0, 1

# Action-source codes. Random draws are split by the branch that produced them
# so tutor usage can be counted as "tutor branch taken".
SRC_GREEDY, SRC_TUTOR, SRC_RANDOM_RL, SRC_RANDOM_TUTOR = 0, 1, 2, 3


@jit
def select_action_core(kind, q, ai, vi, angle, velocity, k1, k2, action_levels,
                       beta, eps_rl, eps_tutor, u_switch, u_explore, u_action):
    n = action_levels.shape[0]
    if kind == KIND_QL:
        use_rl = True
    elif kind == KIND_CTQL:
        use_rl = row_max(q[ai, vi]) > 0.0
    else:
        use_rl = u_switch < beta
    random_action = min(int(u_action * n), n - 1)
    if use_rl:
        if u_explore < 1.0 - eps_rl:
            return greedy_index(q[ai, vi]), SRC_GREEDY
        return random_action, SRC_RANDOM_RL
    if u_explore < 1.0 - eps_tutor:
        v = -(k1 * angle + k2 * velocity)
        return nearest_index(action_levels, v), SRC_TUTOR
    return random_action, SRC_RANDOM_TUTOR


@jit
def weighted_distance(angle, velocity, goal_angle, goal_velocity, w_angle, w_velocity):
    da = angle - goal_angle
    dv = velocity - goal_velocity
    return w_angle * da * da + w_velocity * dv * dv


@jit
def reward_core(reward_kind, prev_angle, prev_velocity, angle, velocity, torque,
                goal_angle, goal_velocity, w_angle, w_velocity, w_torque,
                prize_value, prize_radius):
    if reward_kind == REWARD_DISTANCE:
        r = (weighted_distance(prev_angle, prev_velocity, goal_angle, goal_velocity, w_angle, w_velocity)
             - weighted_distance(angle, velocity, goal_angle, goal_velocity, w_angle, w_velocity))
        if math.hypot(angle - goal_angle, velocity - goal_velocity) < prize_radius:
            r += prize_value
        return r
    return -(w_angle * angle * angle + w_velocity * velocity * velocity + w_torque * torque * torque)


@jit
def episode_kernel(q, angle_levels, velocity_levels, action_levels,
                   kind, beta, eps_rl, eps_tutor, k1, k2,
                   reward_kind, goal_angle, goal_velocity, w_angle, w_velocity, w_torque,
                   prize_value, prize_radius, tutor_quantized,
                   gravity_gain, inv_inertia, dt, semi_implicit,
                   alpha, gamma, learn,
                   x0_angle, x0_velocity, uniforms, noise, use_noise,
                   trajectory, actions, sources, rewards):
    """Run ``uniforms.shape[0]`` steps, filling the output arrays in place.

    ``q`` is updated after every step when ``learn`` is true.
    """
    n_steps = uniforms.shape[0]
    angle = x0_angle
    velocity = x0_velocity
    trajectory[0, 0] = angle
    trajectory[0, 1] = velocity
    ai = nearest_index(angle_levels, angle)
    vi = nearest_index(velocity_levels, velocity)
    for k in range(n_steps):
        if tutor_quantized:
            obs_angle = angle_levels[ai]
            obs_velocity = velocity_levels[vi]
        else:
            obs_angle = angle
            obs_velocity = velocity
        a, src = select_action_core(kind, q, ai, vi, obs_angle, obs_velocity, k1, k2, action_levels,
                                    beta, eps_rl, eps_tutor,
                                    uniforms[k, 0], uniforms[k, 1], uniforms[k, 2])
        torque = action_levels[a]
        new_angle, new_velocity = euler_step(angle, velocity, torque, gravity_gain,
                                             inv_inertia, dt, semi_implicit)
        if use_noise:
            new_angle = wrap_angle(new_angle + noise[k, 0])
            new_velocity = min(max(new_velocity + noise[k, 1], -MAX_SPEED), MAX_SPEED)
        r = reward_core(reward_kind, angle, velocity, new_angle, new_velocity, torque,
                        goal_angle, goal_velocity, w_angle, w_velocity, w_torque,
                        prize_value, prize_radius)
        new_ai = nearest_index(angle_levels, new_angle)
        new_vi = nearest_index(velocity_levels, new_velocity)
        if learn:
            q_update_inplace(q, ai, vi, a, new_ai, new_vi, r, alpha, gamma)
        actions[k] = a
        sources[k] = src
        rewards[k] = r
        trajectory[k + 1, 0] = new_angle
        trajectory[k + 1, 1] = new_velocity
        angle = new_angle
        velocity = new_velocity
        ai = new_ai
        vi = new_vi
