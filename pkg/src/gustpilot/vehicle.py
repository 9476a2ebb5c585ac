"""Guidance-level hexacopter model.

Translational motion is a double integrator driven by thrust and tilt, with
the tilt following its reference through a first-order lag that stands in
for the onboard attitude loop.  Wind acts as linear drag toward the local air
velocity.  Yaw is held at zero.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericError

MAX_TILT = math.pi / 6
MAX_EXTRA_ACCEL = 3.0


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1.544
    gravity: float = 9.81
    attitude_lag: float = 0.15
    wind_drag: float = 0.5
    dt_control: float = 0.05
    physics_substeps: int = 5

    def __post_init__(self):
        for name in ("mass", "gravity", "attitude_lag", "wind_drag", "dt_control"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.physics_substeps < 1:
            raise ValueError("physics_substeps must be positive")

    @property
    def hover_thrust(self):
        return self.mass * self.gravity

    @property
    def max_thrust(self):
        return self.mass * (self.gravity + MAX_EXTRA_ACCEL)


@dataclass
class MavState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_rate: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_list(self):
        return [*map(float, self.position), *map(float, self.velocity),
                *map(float, self.attitude), *map(float, self.angular_rate)]

    @classmethod
    def from_list(cls, values):
        a = np.asarray(values, dtype=np.float64)
        return cls(a[0:3].copy(), a[3:6].copy(), a[6:9].copy(), a[9:12].copy())

    def copy(self):
        return MavState.from_list(self.as_list())


@dataclass(frozen=True)
class ActuatorCmd:
    thrust: float
    roll_ref: float
    pitch_ref: float

    def clamped(self, params):
        """Return (command inside the actuator box, whether anything was clipped)."""
        t = min(max(self.thrust, params.hover_thrust), params.max_thrust)
        r = min(max(self.roll_ref, -MAX_TILT), MAX_TILT)
        p = min(max(self.pitch_ref, -MAX_TILT), MAX_TILT)
        changed = (t != self.thrust) or (r != self.roll_ref) or (p != self.pitch_ref)
        return ActuatorCmd(t, r, p), changed


def world_to_body(euler, v_world):
    """Rotate a world-frame vector into the body frame (roll, pitch, yaw order)."""
    phi, theta, psi = euler
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    rot = np.array([
        [ct * cp, ct * sp, -st],
        [sf * st * cp - cf * sp, sf * st * sp + cf * cp, sf * ct],
        [cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct],
    ])
    return rot @ np.asarray(v_world, dtype=np.float64)


def accel_from_cmd(cmd, roll, pitch, yaw, params):
    """Acceleration produced by thrust ``cmd.thrust`` at the actual tilt (roll, pitch)."""
    tm = cmd.thrust / params.mass
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([tm * (cy * pitch + sy * roll),
                     tm * (sy * pitch - cy * roll),
                     tm - params.gravity])


def step(state, cmd, wind, params, backend=None):
    """Advance one control period; returns ``(next_state, clamped)``.

    Out-of-box commands are clipped and reported through ``clamped``.
    """
    cmd, clamped = cmd.clamped(params)
    impl = kernels._impl if backend is None else kernels.get_backend(backend)
    yaw = float(state.attitude[2])
    h = params.dt_control / params.physics_substeps
    out = impl.integrate(
        state.as_list(), cmd.thrust, cmd.roll_ref, cmd.pitch_ref,
        params.mass, params.gravity, params.attitude_lag, params.wind_drag,
        h, params.physics_substeps, math.cos(yaw), math.sin(yaw),
        *wind.kernel_args(backend))
    if not all(math.isfinite(v) for v in out):
        raise NumericError("vehicle state became non-finite")
    return MavState.from_list(out), clamped
