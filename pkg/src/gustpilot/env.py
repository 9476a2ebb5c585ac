"""Waypoint-rallying episodes for the three control schemes.

``mf``    the policy outputs (roll ref, pitch ref, thrust) directly.
``lb``    the policy outputs nine time-constant increments for the pole-placed
          PID, which then flies the vehicle.
``fixed`` the same PID with the nominal poles and no adaptation.

With ``persist_taus`` the time constants carry over from one episode to the
next (only the integrators restart); otherwise every episode starts from
the nominal poles.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .control import INCREMENT_LIMIT, ControllerParams
from .errors import ShapeError
from .vehicle import MAX_TILT, ActuatorCmd, MavState, VehicleParams, step as vehicle_step

SCHEMES = ("mf", "lb", "fixed")
SPAWN = (0.0, 0.0, 3.0)
ALTITUDE_BOUNDS = (0.25, 20.0)
REWARD_REACHED = 1000.0
REWARD_FAILED = -550.0
REWARD_RECEDED = -20.0
FORWARD_SCALE = 20.0  # C1
FORWARD_SPREAD = 20.0  # C2
MF_OBS_DIM = 19
LB_OBS_DIM = 37
HISTORY = 3


@dataclass
class EpisodeConfig:
    target: np.ndarray
    d_reached: float = 3.0
    max_steps: int = 300
    spawn: tuple = SPAWN

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.target.shape != (3,):
            raise ShapeError("target must be a 3-vector")
        if self.d_reached <= 0 or self.max_steps < 1:
            raise ValueError("d_reached and max_steps must be positive")


def sample_target(rng, radius=(5.0, 20.0), altitude=(2.0, 20.0)):
    """Target with |x|, |y| in (lo, hi] on either side of the origin and z in [zlo, zhi]."""
    lo, hi = radius
    xy = []
    for _ in range(2):
        mag = hi - rng.uniform(0.0, hi - lo)
        xy.append(mag if rng.uniform() < 0.5 else -mag)
    return np.array([xy[0], xy[1], rng.uniform(*altitude)])


def curriculum_radius(step, total_steps, radii=(3.0, 2.0, 1.0), fractions=(0.25, 0.5)):
    """Success radius for a training step: shrinks at fixed fractions of the run."""
    for frac, r in zip(fractions, radii):
        if step < frac * total_steps:
            return r
    return radii[-1]


def reward(d_t, d_prev, z_w, d_reached):
    """Return ``(reward, kind)`` with kind in {"success", "failure", "forward", "receded"}.

    Success takes precedence over the altitude check, which takes precedence
    over the shaping terms.  Progress is ``d_prev - d_t`` (positive when closing in).
    """
    if d_t <= d_reached:
        return REWARD_REACHED, "success"
    if not ALTITUDE_BOUNDS[0] <= z_w <= ALTITUDE_BOUNDS[1]:
        return REWARD_FAILED, "failure"
    progress = d_prev - d_t
    if progress <= 0.0:
        return REWARD_RECEDED, "receded"
    scaled = (d_t / (1.0 + progress)) / FORWARD_SPREAD
    return FORWARD_SCALE * math.exp(-scaled * scaled), "forward"


class Normalizer:
    """Running per-entry standardisation (Welford) with output clipping."""

    def __init__(self, dim, clip=10.0, eps=1e-8):
        self.dim = dim
        self.clip = clip
        self.eps = eps
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)
        self.frozen = False

    @property
    def var(self):
        if self.count == 0:
            return np.ones(self.dim)
        return self.m2 / self.count

    def update(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def __call__(self, x, training=True):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ShapeError(f"expected observation of length {self.dim}, got {x.shape}")
        if training and not self.frozen:
            self.update(x)
        out = (x - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(out, -self.clip, self.clip)

    def state_arrays(self):
        return {"count": np.array([float(self.count)]), "mean": self.mean.copy(),
                "m2": self.m2.copy()}

    def load_arrays(self, arrays):
        self.count = int(arrays["count"][0])
        self.mean = arrays["mean"].copy()
        self.m2 = arrays["m2"].copy()


def build_state(history):
    """Stack [o_t; o_t-1; o_t-2; o_t - o_t-1; o_t-1 - o_t-2; second difference]."""
    if len(history) != HISTORY:
        raise ShapeError(f"need exactly {HISTORY} observations, got {len(history)}")
    o0, o1, o2 = (np.asarray(o, dtype=np.float64) for o in history)
    if not o0.shape == o1.shape == o2.shape or o0.ndim != 1:
        raise ShapeError("observations must be equal-length vectors")
    vel = o0 - o1
    vel_prev = o1 - o2
    return np.concatenate([o0, o1, o2, vel, vel_prev, vel - vel_prev])


def action_bounds(scheme, params=None):
    params = params or VehicleParams()
    if scheme == "mf":
        low = np.array([-MAX_TILT, -MAX_TILT, params.hover_thrust])
        high = np.array([MAX_TILT, MAX_TILT, params.max_thrust])
    elif scheme == "lb":
        low = np.full(9, -INCREMENT_LIMIT)
        high = np.full(9, INCREMENT_LIMIT)
    else:
        raise ValueError(f"scheme {scheme!r} has no learnable action")
    return low, high


def obs_dim(scheme):
    return MF_OBS_DIM if scheme == "mf" else LB_OBS_DIM


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    @property
    def terminal(self):
        """True only for success or failure (time-outs still bootstrap)."""
        return self.info.get("kind") in ("success", "failure")


class MissionEnv:
    """One rallying environment; owns the vehicle, the PID and the observation history."""

    def __init__(self, wind, scheme, params=None, normalizer=None, persist_taus=False):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.wind = wind
        self.scheme = scheme
        self.params = params or VehicleParams()
        self.normalizer = normalizer if normalizer is not None else Normalizer(obs_dim(scheme))
        self.training = True
        self.persist_taus = persist_taus
        self.controller = ControllerParams.nominal()
        self.cfg = None
        self.vehicle = None
        self.history = None
        self.steps = 0
        self.d_prev = 0.0
        self.last_action = None
        self.last_cmd = None

    @property
    def state_dim(self):
        return 6 * obs_dim(self.scheme)

    def _hover_cmd(self):
        return ActuatorCmd(self.params.hover_thrust, 0.0, 0.0)

    def distance(self):
        return float(np.linalg.norm(self.vehicle.position - self.cfg.target))

    def observe(self):
        """Raw (unnormalised) observation vector for the current scheme."""
        s = self.vehicle
        error = s.position - self.cfg.target
        common = [*s.attitude, *s.velocity, *s.angular_rate, *s.position, *error,
                  self.distance()]
        if self.scheme == "mf":
            head = list(self.last_action)
        else:
            cmd = self.last_cmd
            head = [*self.controller.channel_taus(), cmd.thrust, cmd.pitch_ref, cmd.roll_ref,
                    *self.controller.channel_gains()]
        return np.array(head + common, dtype=np.float64)

    def _push_obs(self, fill=False):
        o = self.normalizer(self.observe(), training=self.training)
        if fill:
            self.history = [o, o, o]
        else:
            self.history = [o, self.history[0], self.history[1]]
        return build_state(self.history)

    def reset(self, cfg):
        self.cfg = cfg
        self.vehicle = MavState(position=np.array(cfg.spawn, dtype=np.float64))
        if self.persist_taus:
            taus = self.controller.taus
            self.controller = ControllerParams(taus=list(taus))
        else:
            self.controller = ControllerParams.nominal()
        self.steps = 0
        self.d_prev = self.distance()
        hover = self._hover_cmd()
        self.last_cmd = hover
        self.last_action = np.array([hover.roll_ref, hover.pitch_ref, hover.thrust])
        return self._push_obs(fill=True)

    def step(self, action=None):
        """Advance one control period. ``action`` is ignored for the fixed scheme."""
        if self.cfg is None:
            raise RuntimeError("reset() must be called before step()")
        p = self.params
        clamped_action = False
        if self.scheme == "mf":
            a = np.asarray(action, dtype=np.float64)
            if a.shape != (3,):
                raise ShapeError("mf action is (roll_ref, pitch_ref, thrust)")
            cmd, clamped_action = ActuatorCmd(a[2], a[0], a[1]).clamped(p)
            self.last_action = np.array([cmd.roll_ref, cmd.pitch_ref, cmd.thrust])
            u = None
        else:
            if self.scheme == "lb":
                a = np.asarray(action, dtype=np.float64)
                if a.shape != (9,):
                    raise ShapeError("lb action is nine tau increments")
                clamped_action = bool(np.any(np.abs(a) > INCREMENT_LIMIT))
                self.controller.increment(a)
            cmd, u = self.controller.command(self.vehicle.position, self.vehicle.velocity,
                                             self.cfg.target, p.dt_control,
                                             float(self.vehicle.attitude[2]), p)
        self.last_cmd = cmd
        self.vehicle, clamped_cmd = vehicle_step(self.vehicle, cmd, self.wind, p)
        self.steps += 1

        d_t = self.distance()
        r, kind = reward(d_t, self.d_prev, float(self.vehicle.position[2]), self.cfg.d_reached)
        info = {
            "kind": kind,
            "success": kind == "success",
            "altitude_failure": kind == "failure",
            "action_clamped": bool(clamped_action),
            "command_clamped": bool(clamped_cmd),
            "d_t": d_t,
            "d_rate": d_t - self.d_prev,
            "accel": u,
        }
        self.d_prev = d_t
        done = kind in ("success", "failure") or self.steps >= self.cfg.max_steps
        info["timeout"] = done and kind not in ("success", "failure")
        state = self._push_obs()
        return StepOutcome(state, r, done, info)

    def snapshot(self):
        """Everything needed to continue the current episode bit for bit."""
        c = self.controller
        return {
            "target": self.cfg.target.copy(),
            "episode": np.array([self.cfg.d_reached, float(self.cfg.max_steps),
                                 float(self.steps), self.d_prev]),
            "spawn": np.array(self.cfg.spawn, dtype=np.float64),
            "vehicle": np.array(self.vehicle.as_list()),
            "history": np.array(self.history),
            "last_action": np.array(self.last_action, dtype=np.float64),
            "last_cmd": np.array([self.last_cmd.thrust, self.last_cmd.roll_ref,
                                  self.last_cmd.pitch_ref]),
            "taus": np.array([t.as_tuple() for t in c.taus]),
            "integrals": np.array([[s.integral, s.last_error] for s in c.states]),
        }

    def restore(self, snap):
        from .control import AxisCtrlState, AxisTaus
        ep = snap["episode"]
        self.cfg = EpisodeConfig(snap["target"].copy(), float(ep[0]), int(ep[1]),
                                 tuple(snap["spawn"].tolist()))
        self.steps = int(ep[2])
        self.d_prev = float(ep[3])
        self.vehicle = MavState.from_list(snap["vehicle"])
        self.history = [row.copy() for row in snap["history"]]
        self.last_action = snap["last_action"].copy()
        t, r, pch = snap["last_cmd"]
        self.last_cmd = ActuatorCmd(float(t), float(r), float(pch))
        self.controller = ControllerParams(
            taus=[AxisTaus(*map(float, row)) for row in snap["taus"]],
            states=[AxisCtrlState(float(a), float(b)) for a, b in snap["integrals"]])
