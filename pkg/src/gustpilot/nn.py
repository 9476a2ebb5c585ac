"""Dense networks with hand-written backpropagation.

Everything runs in float64 on numpy arrays.  Parameters live in ordered
dicts (``w0, b0, w1, b1, ...``) with weights shaped ``(fan_in, fan_out)``.
Inputs may be a single vector or a ``(batch, dim)`` matrix.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple = (256, 256)
    output_dim: int = 1
    slope: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ShapeError("all layer sizes must be >= 1")

    @property
    def layer_sizes(self):
        return (self.input_dim, *self.hidden_dims, self.output_dim)


def init_params(spec, rng):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    params = {}
    sizes = spec.layer_sizes
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"w{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)
    return params


def check_params(spec, params):
    sizes = spec.layer_sizes
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w, b = params.get(f"w{i}"), params.get(f"b{i}")
        if w is None or b is None or w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ShapeError(f"layer {i} parameters do not match {fan_in}->{fan_out}")


def _as_batch(x, dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"expected input width {dim}, got shape {np.shape(x)}")
    return x, single


def mlp_forward(spec, params, x, keep=False):
    """Leaky-ReLU hidden layers, linear output.

    With ``keep=True`` also returns the per-layer cache needed by
    :func:`mlp_gradients`.
    """
    h, single = _as_batch(x, spec.input_dim)
    n_layers = len(spec.layer_sizes) - 1
    cache = [h]
    for i in range(n_layers):
        z = h @ params[f"w{i}"] + params[f"b{i}"]
        if i < n_layers - 1:
            h = np.where(z > 0, z, spec.slope * z)
            cache.append(z)
            cache.append(h)
        else:
            h = z
    out = h[0] if single else h
    if keep:
        return out, (cache, single)
    return out


def mlp_gradients(spec, params, x, upstream, cache=None):
    """Gradients of ``sum(upstream * output)`` w.r.t. every parameter and the input.

    Returns ``(grads, grad_input)``; ``grads`` mirrors ``params``.
    """
    if cache is None:
        _, cache = mlp_forward(spec, params, x, keep=True)
    acts, single = cache
    g = np.asarray(upstream, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != (acts[0].shape[0], spec.output_dim):
        raise ShapeError(f"upstream gradient shape {g.shape} does not match output")
    n_layers = len(spec.layer_sizes) - 1
    grads = {}
    for i in reversed(range(n_layers)):
        h_in = acts[2 * i]
        grads[f"w{i}"] = h_in.T @ g
        grads[f"b{i}"] = g.sum(axis=0)
        g = g @ params[f"w{i}"].T
        if i > 0:
            z = acts[2 * i - 1]
            g = np.where(z > 0, g, spec.slope * g)
    grad_input = g[0] if single else g
    return grads, grad_input


class Mlp:
    """A spec plus its parameters."""

    def __init__(self, spec, rng=None, params=None):
        self.spec = spec
        if params is None:
            params = init_params(spec, rng if rng is not None else np.random.default_rng())
        check_params(spec, params)
        self.params = params

    def __call__(self, x):
        return mlp_forward(self.spec, self.params, x)

    def forward(self, x):
        return mlp_forward(self.spec, self.params, x, keep=True)

    def backward(self, cache, upstream):
        return mlp_gradients(self.spec, self.params, None, upstream, cache=cache)

    def copy(self):
        return Mlp(self.spec, params={k: v.copy() for k, v in self.params.items()})


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params, grads, state):
    """Bias-corrected Adam update applied to ``params`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter {name} shape {p.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.first_moment[name] = m
        state.second_moment[name] = v
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state


def _log1m_tanh2(u):
    # log(1 - tanh(u)^2), stable for large |u|
    return 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))


@dataclass
class SquashedSample:
    action: np.ndarray
    log_prob: np.ndarray
    pre_tanh: np.ndarray
    squashed: np.ndarray
    std: np.ndarray
    noise: np.ndarray


def split_head(raw, action_dim):
    """Split raw policy output into mean and clamped log-std."""
    raw = np.asarray(raw, dtype=np.float64)
    mean = raw[..., :action_dim]
    raw_log_std = raw[..., action_dim:]
    log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
    active = (raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX)
    return mean, log_std, active


def squashed_sample(mean, log_std, low, high, noise):
    """Reparameterised tanh-Gaussian sample mapped onto ``[low, high]``.

    Returns the action and the log-density of that action (summed over the
    last axis), including the tanh and affine change-of-variables terms.
    """
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.clip(np.asarray(log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX)
    noise = np.asarray(noise, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    if mean.shape != log_std.shape or mean.shape != noise.shape:
        raise ShapeError("mean, log_std and noise must share a shape")
    if mean.shape[-1] != low.shape[-1] or low.shape != high.shape:
        raise ShapeError("bounds do not match the action dimension")
    if np.any(low >= high):
        raise ValueError("every bound needs low < high")
    std = np.exp(log_std)
    u = mean + std * noise
    y = np.tanh(u)
    half = 0.5 * (high - low)
    action = low + (y + 1.0) * half
    # keep strictly inside the open box even when tanh saturates to +-1
    action = np.clip(action, np.nextafter(low, high), np.nextafter(high, low))
    log_prob = (-0.5 * noise * noise - log_std - _HALF_LOG_2PI
                - _log1m_tanh2(u) - np.log(half)).sum(axis=-1)
    return SquashedSample(action, log_prob, u, y, std, noise)


def squashed_mean(mean, low, high):
    """Deterministic action: the squashed mean."""
    s = squashed_sample(mean, np.zeros_like(mean), low, high, np.zeros_like(mean))
    return s.action


def squashed_grads(sample, low, high, dlogp, daction):
    """Back-propagate ``dlogp`` (per row) and ``daction`` onto (mean, log_std).

    ``dlogp`` has shape ``(batch,)`` and ``daction`` ``(batch, action_dim)``.
    """
    y = sample.squashed
    half = 0.5 * (np.asarray(high) - np.asarray(low))
    dlogp = np.asarray(dlogp, dtype=np.float64)[..., None]
    # d logp / d u = 2 tanh(u); d action / d u = half * (1 - tanh^2)
    du = dlogp * 2.0 * y + daction * half * (1.0 - y * y)
    dmean = du
    dlog_std = du * sample.std * sample.noise - dlogp
    return dmean, dlog_std
