"""Discrete-time inverted pendulum.

Angle 0 is the upright (unstable) position. The continuous model is the
rigid rod pendulum

    angle'    = velocity
    velocity' = (3 g / 2 l) sin(angle) + torque / I,   I = m l^2 / 3

discretized with forward Euler (both updates from the old state). After each
step the angle is wrapped into (-pi, pi] and the velocity clamped to
[-MAX_SPEED, MAX_SPEED]. The Gym-style semi-implicit variant, which advances
the angle with the new velocity, is available as an alternative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import jit

MAX_SPEED = 8.0
MAX_TORQUE = 2.0
FACTOR_BOUNDS = (0.95, 1.05)

INTEGRATORS = ("forward-euler", "semi-implicit")
DEFAULT_INTEGRATOR = "forward-euler"


@dataclass(frozen=True)
class PendulumParams:
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 10.0
    sample_time: float = 0.05
    inertia: float = field(init=False)

    def __post_init__(self):
        for name in ("mass", "length", "gravity", "sample_time"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        object.__setattr__(self, "inertia", self.mass * self.length**2 / 3.0)

    @property
    def gravity_gain(self) -> float:
        """Coefficient of sin(angle) in the angular acceleration."""
        return 3.0 * self.gravity / (2.0 * self.length)


@dataclass(frozen=True)
class LinearModel:
    a_matrix: np.ndarray
    b_matrix: np.ndarray


@jit
def wrap_angle(angle):
    if angle > math.pi or angle <= -math.pi:
        angle = math.pi - ((math.pi - angle) % (2.0 * math.pi))
        if angle <= -math.pi:
            angle = math.pi
    return angle


@jit
def euler_step(angle, velocity, torque, gravity_gain, inv_inertia, dt, semi_implicit):
    """One integrator step on scalars; returns ``(angle, velocity)``."""
    accel = gravity_gain * math.sin(angle) + torque * inv_inertia
    new_velocity = velocity + dt * accel
    if new_velocity > MAX_SPEED:
        new_velocity = MAX_SPEED
    elif new_velocity < -MAX_SPEED:
        new_velocity = -MAX_SPEED
    if semi_implicit:
        new_angle = angle + dt * new_velocity
    else:
        new_angle = angle + dt * velocity
    return wrap_angle(new_angle), new_velocity


def step(state, torque, params: PendulumParams, integrator=DEFAULT_INTEGRATOR, noise=None):
    """Advance ``state = [angle, velocity]`` by one sample period.

    ``torque`` is clipped to the actuator range. ``noise``, if given, is a
    2-vector added to the state before wrapping and clamping.
    """
    angle, velocity = float(state[0]), float(state[1])
    torque = float(torque)
    if not (math.isfinite(angle) and math.isfinite(velocity) and math.isfinite(torque)):
        raise ValueError(f"non-finite state or torque: {state!r}, {torque!r}")
    if integrator not in INTEGRATORS:
        raise ValueError(f"unknown integrator {integrator!r}")
    torque = min(max(torque, -MAX_TORQUE), MAX_TORQUE)
    new_angle, new_velocity = euler_step(
        angle, velocity, torque, params.gravity_gain, 1.0 / params.inertia,
        params.sample_time, integrator == "semi-implicit",
    )
    if noise is not None:
        new_angle = wrap_angle(new_angle + float(noise[0]))
        new_velocity = min(max(new_velocity + float(noise[1]), -MAX_SPEED), MAX_SPEED)
    return np.array([new_angle, new_velocity])


def linearized_model(params: PendulumParams) -> LinearModel:
    # Printed form of the tutor's design model; note A[0] is [0, 1 + T], not [1, T].
    t = params.sample_time
    a = np.array([[0.0, 1.0 + t], [3.0 * t * params.gravity / (2.0 * params.length), 1.0]])
    b = np.array([[0.0], [t / params.inertia]])
    return LinearModel(a, b)


def perturb_params(nominal: PendulumParams, mass_factor: float, length_factor: float) -> PendulumParams:
    lo, hi = FACTOR_BOUNDS
    for name, factor in (("mass_factor", mass_factor), ("length_factor", length_factor)):
        if not lo <= factor <= hi:
            raise ValueError(f"{name}={factor} outside [{lo}, {hi}]")
    return replace(nominal, mass=nominal.mass * mass_factor, length=nominal.length * length_factor)
