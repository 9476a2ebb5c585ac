"""PID-equivalent state feedback parametrised by closed-loop time constants.

Each world axis runs ``u = -k_i*z - k_p*e - k_d*v`` with ``e`` the position
error and ``z`` its integral.  The gains place the three closed-loop poles at
``-1/tau_1, -1/tau_2, -1/tau_3``.
"""

import math
from dataclasses import dataclass, field

from .vehicle import ActuatorCmd, MAX_TILT

TAU_MIN = 5e-3
TAU_MAX = 3.0
INCREMENT_LIMIT = 0.01
INTEGRAL_LIMIT = 10.0
NOMINAL_TAUS = (1.0, 2.5, 0.875)

# axis order x, y, z drives the pitch, roll and thrust channels respectively
AXIS_CHANNELS = ("pitch", "roll", "thrust")


@dataclass(frozen=True)
class AxisTaus:
    tau1: float
    tau2: float
    tau3: float

    def as_tuple(self):
        return (self.tau1, self.tau2, self.tau3)


@dataclass(frozen=True)
class AxisGains:
    k_i: float
    k_p: float
    k_d: float

    def as_tuple(self):
        return (self.k_i, self.k_p, self.k_d)


@dataclass
class AxisCtrlState:
    integral: float = 0.0
    last_error: float = 0.0


def gains_from_taus(t):
    """Closed-form gains whose characteristic polynomial has roots -1/tau_i."""
    t1, t2, t3 = t.as_tuple()
    prod = t1 * t2 * t3
    return AxisGains(
        k_i=1.0 / prod,
        k_p=(t1 + t2 + t3) / prod,
        k_d=(t1 * t2 + t1 * t3 + t2 * t3) / prod,
    )


def characteristic_residual(g, lam):
    return lam ** 3 + g.k_d * lam ** 2 + g.k_p * lam + g.k_i


def _clip(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def apply_increments(t, increments):
    """Add per-tau increments and keep each tau inside [TAU_MIN, TAU_MAX]."""
    return AxisTaus(*(_clip(a + d, TAU_MIN, TAU_MAX)
                      for a, d in zip(t.as_tuple(), increments)))


def pid_accel(ctrl, gains, error, velocity, dt):
    """One control update; returns ``(u, new_state)``. Velocity reference is zero."""
    z = _clip(ctrl.integral + error * dt, -INTEGRAL_LIMIT, INTEGRAL_LIMIT)
    u = -gains.k_i * z - gains.k_p * error - gains.k_d * velocity
    return u, AxisCtrlState(integral=z, last_error=error)


def accel_to_lowlevel(u, yaw, params):
    """Convert a commanded acceleration into thrust and tilt references."""
    ux, uy, uz = (float(c) for c in u)
    thrust = _clip(params.mass * (uz + params.gravity), params.hover_thrust, params.max_thrust)
    scale = params.mass / thrust
    cy, sy = math.cos(yaw), math.sin(yaw)
    pitch = _clip(scale * (cy * ux + sy * uy), -MAX_TILT, MAX_TILT)
    roll = _clip(scale * (sy * ux - cy * uy), -MAX_TILT, MAX_TILT)
    return ActuatorCmd(thrust=thrust, roll_ref=roll, pitch_ref=pitch)


@dataclass
class ControllerParams:
    """Three axis controllers (x/pitch, y/roll, z/thrust) with their gains kept in sync."""

    taus: list = field(default_factory=lambda: [AxisTaus(*NOMINAL_TAUS) for _ in range(3)])
    states: list = field(default_factory=lambda: [AxisCtrlState() for _ in range(3)])
    gains: list = None

    def __post_init__(self):
        self.gains = [gains_from_taus(t) for t in self.taus]

    @classmethod
    def nominal(cls):
        return cls()

    def increment(self, increments):
        """Apply nine increments ordered roll(3), pitch(3), thrust(3)."""
        if len(increments) != 9:
            raise ValueError(f"expected 9 increments, got {len(increments)}")
        by_channel = {
            "roll": increments[0:3],
            "pitch": increments[3:6],
            "thrust": increments[6:9],
        }
        for axis, channel in enumerate(AXIS_CHANNELS):
            d = [_clip(float(v), -INCREMENT_LIMIT, INCREMENT_LIMIT) for v in by_channel[channel]]
            self.taus[axis] = apply_increments(self.taus[axis], d)
            self.gains[axis] = gains_from_taus(self.taus[axis])

    def command(self, position, velocity, reference, dt, yaw, params):
        """Run the three axis laws; returns ``(ActuatorCmd, accel vector)``."""
        u = []
        for axis in range(3):
            e = float(position[axis]) - float(reference[axis])
            ua, self.states[axis] = pid_accel(self.states[axis], self.gains[axis], e,
                                              float(velocity[axis]), dt)
            u.append(ua)
        return accel_to_lowlevel(u, yaw, params), u

    def channel_taus(self):
        """Taus flattened in roll, pitch, thrust order (9 values)."""
        order = [AXIS_CHANNELS.index(c) for c in ("roll", "pitch", "thrust")]
        return [v for axis in order for v in self.taus[axis].as_tuple()]

    def channel_gains(self):
        """Gains flattened per channel as (k_p, k_i, k_d), roll, pitch, thrust."""
        order = [AXIS_CHANNELS.index(c) for c in ("roll", "pitch", "thrust")]
        out = []
        for axis in order:
            g = self.gains[axis]
            out.extend((g.k_p, g.k_i, g.k_d))
        return out
