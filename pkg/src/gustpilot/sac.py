"""Soft Actor-Critic with a learned state-value network and twin Q critics.

The value network ``V`` has a slowly tracking copy ``V_target`` used for the
Q bootstrap.  One call to :func:`train_step` performs one gradient update of
every network followed by one soft target update.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .nn import (AdamState, Mlp, MlpSpec, adam_step, split_head, squashed_grads,
                 squashed_mean, squashed_sample)

NETWORK_NAMES = ("policy", "q1", "q2", "v")


@dataclass
class SacHyper:
    gamma: float = 0.99
    alpha: float = 1.0
    polyak_tau: float = 5e-3
    batch_size: int = 256
    lr: float = 3e-4
    updates_per_step: int = 1
    hidden_dims: tuple = (256, 256)
    slope: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 < self.polyak_tau <= 1.0:
            raise ValueError("polyak_tau must lie in (0, 1]")
        if self.batch_size < 1 or self.updates_per_step < 1:
            raise ValueError("batch_size and updates_per_step must be positive")
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)


@dataclass
class LossReport:
    q1_loss: float
    q2_loss: float
    v_loss: float
    policy_loss: float
    mean_q: float
    mean_entropy: float

    def as_dict(self):
        return dict(self.__dict__)


class SacNetworks:
    """Policy, twin critics, value net, its target copy and one Adam state per trained net."""

    def __init__(self, state_dim, action_dim, low, high, hyper=None, rng=None):
        hyper = hyper or SacHyper()
        rng = rng if rng is not None else np.random.default_rng()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        if self.low.shape != (self.action_dim,) or self.high.shape != (self.action_dim,):
            raise ShapeError("action bounds must have one entry per action dimension")
        hid, slope = hyper.hidden_dims, hyper.slope
        self.policy = Mlp(MlpSpec(state_dim, hid, 2 * action_dim, slope), rng)
        self.q1 = Mlp(MlpSpec(state_dim + action_dim, hid, 1, slope), rng)
        self.q2 = Mlp(MlpSpec(state_dim + action_dim, hid, 1, slope), rng)
        self.v = Mlp(MlpSpec(state_dim, hid, 1, slope), rng)
        self.v_target = self.v.copy()
        self.optim = {name: AdamState(lr=hyper.lr) for name in NETWORK_NAMES}

    def nets(self):
        return {"policy": self.policy, "q1": self.q1, "q2": self.q2, "v": self.v,
                "v_target": self.v_target}

    def act(self, state, rng=None, deterministic=False):
        """Action for one state; the squashed mean when ``deterministic``."""
        raw = self.policy(np.asarray(state, dtype=np.float64))
        mean, log_std, _ = split_head(raw, self.action_dim)
        if deterministic:
            return squashed_mean(mean, self.low, self.high)
        noise = rng.standard_normal(self.action_dim)
        return squashed_sample(mean, log_std, self.low, self.high, noise).action


def q_target(reward, terminal, v_target_next, gamma):
    """Soft Bellman target; no bootstrap past a terminal transition."""
    return reward + gamma * (1.0 - np.asarray(terminal, dtype=np.float64)) * v_target_next


def v_target_value(q1, q2, log_prob, alpha):
    return np.minimum(q1, q2) - alpha * log_prob


def _finite(name, value):
    if not np.isfinite(value):
        raise NumericError(f"{name} is not finite")
    return float(value)


def compute_losses(nets, batch, hyper, noise):
    """All four SAC losses and their parameter gradients for one minibatch.

    ``noise`` is the standard-normal draw (batch, action_dim) used to
    reparameterise the fresh policy actions shared by the value target and
    the policy objective.  Returns ``(LossReport, grads)`` where ``grads``
    maps network name to a parameter-gradient dict.
    """
    s = np.asarray(batch.states, dtype=np.float64)
    a = np.asarray(batch.actions, dtype=np.float64)
    r = np.asarray(batch.rewards, dtype=np.float64)
    s2 = np.asarray(batch.next_states, dtype=np.float64)
    done = np.asarray(batch.terminals, dtype=np.float64)
    n = len(r)
    if n == 0:
        raise ValueError("empty batch")
    if s.shape != (n, nets.state_dim) or a.shape != (n, nets.action_dim):
        raise ShapeError("batch does not match network dimensions")
    alpha = hyper.alpha
    grads = {}

    # critics
    y = q_target(r, done, nets.v_target(s2)[:, 0], hyper.gamma)
    sa = np.concatenate([s, a], axis=1)
    q_losses = []
    for name in ("q1", "q2"):
        net = getattr(nets, name)
        pred, cache = net.forward(sa)
        res = pred[:, 0] - y
        q_losses.append(0.5 * np.mean(res * res))
        grads[name], _ = net.backward(cache, (res / n)[:, None])
        if name == "q1":
            mean_q = float(np.mean(pred))

    # fresh actions from the current policy
    raw, pcache = nets.policy.forward(s)
    mean, log_std, active = split_head(raw, nets.action_dim)
    smp = squashed_sample(mean, log_std, nets.low, nets.high, noise)
    s_new = np.concatenate([s, smp.action], axis=1)
    q1n, c1 = nets.q1.forward(s_new)
    q2n, c2 = nets.q2.forward(s_new)
    q1n, q2n = q1n[:, 0], q2n[:, 0]
    use_q1 = q1n <= q2n
    qmin = np.where(use_q1, q1n, q2n)

    # value net
    target_v = v_target_value(q1n, q2n, smp.log_prob, alpha)
    v_pred, vcache = nets.v.forward(s)
    res_v = v_pred[:, 0] - target_v
    v_loss = 0.5 * np.mean(res_v * res_v)
    grads["v"], _ = nets.v.backward(vcache, (res_v / n)[:, None])

    # policy: mean(alpha * log pi - min Q) through the reparameterised action
    policy_loss = np.mean(alpha * smp.log_prob - qmin)
    up1 = np.where(use_q1, -1.0 / n, 0.0)[:, None]
    up2 = np.where(use_q1, 0.0, -1.0 / n)[:, None]
    _, gin1 = nets.q1.backward(c1, up1)
    _, gin2 = nets.q2.backward(c2, up2)
    daction = gin1[:, nets.state_dim:] + gin2[:, nets.state_dim:]
    dmean, dlog_std = squashed_grads(smp, nets.low, nets.high, np.full(n, alpha / n), daction)
    dlog_std = np.where(active, dlog_std, 0.0)
    grads["policy"], _ = nets.policy.backward(pcache, np.concatenate([dmean, dlog_std], axis=1))

    report = LossReport(
        q1_loss=_finite("q1 loss", q_losses[0]),
        q2_loss=_finite("q2 loss", q_losses[1]),
        v_loss=_finite("value loss", v_loss),
        policy_loss=_finite("policy loss", policy_loss),
        mean_q=mean_q,
        mean_entropy=float(-np.mean(smp.log_prob)),
    )
    return report, grads


def polyak_update(online, target, tau):
    """Move every target entry a fraction ``tau`` toward the online value, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    for name, p in online.items():
        t = target[name]
        if t.shape != p.shape:
            raise ShapeError(f"target parameter {name} shape {t.shape} != {p.shape}")
        if tau == 1.0:
            t[...] = p
        else:
            t += tau * (p - t)
    return target


def train_step(nets, buffer, hyper, rng):
    """One CER minibatch update of every network; ``None`` while warming up."""
    if buffer.count < hyper.batch_size:
        return None
    report = None
    for _ in range(hyper.updates_per_step):
        batch = buffer.sample_cer(hyper.batch_size, rng)
        noise = rng.standard_normal((hyper.batch_size, nets.action_dim))
        report, grads = compute_losses(nets, batch, hyper, noise)
        for name in NETWORK_NAMES:
            adam_step(getattr(nets, name).params, grads[name], nets.optim[name])
        polyak_update(nets.v.params, nets.v_target.params, hyper.polyak_tau)
    return report
