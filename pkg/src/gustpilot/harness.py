"""Training and evaluation drivers, run configuration, logs and metrics."""

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .env import (EpisodeConfig, MissionEnv, Normalizer, action_bounds, curriculum_radius,
                  obs_dim, sample_target)
from .control import AxisTaus, ControllerParams
from .errors import NumericError
from .nn import AdamState
from .replay import ReplayBuffer, Transition
from .sac import NETWORK_NAMES, SacHyper, SacNetworks, train_step
from .vehicle import VehicleParams
from .wind import GustSpec, generate_procedural, load_field

log = logging.getLogger(__name__)

EPISODES_LOG = "episodes.jsonl"
EVENTS_LOG = "events.jsonl"
AGGREGATE_LOG = "aggregates.csv"
CHECKPOINT_NAME = "checkpoint.gnav"
WINDOW = 100


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scheme: str = "lb"
    total_steps: int = 50_000
    seed: int = 0
    eval_episodes: int = 100
    out_dir: str = "runs/default"
    wind_file: str = None
    eval_wind_file: str = None
    gust: dict = field(default_factory=lambda: dataclasses.asdict(GustSpec()))
    gust_extent: tuple = ((-60.0, 60.0), (-60.0, 60.0), (0.0, 25.0))
    gust_spacing: tuple = (5.0, 5.0, 5.0)
    eval_wind_seed_offset: int = 1
    sac: dict = field(default_factory=lambda: dataclasses.asdict(SacHyper()))
    vehicle: dict = field(default_factory=lambda: dataclasses.asdict(VehicleParams()))
    train_radius: tuple = (5.0, 15.0)
    eval_radius: tuple = (20.0, 50.0)
    altitude: tuple = (2.0, 20.0)
    train_max_steps: int = 300
    eval_max_steps: int = 1000
    eval_d_reached: float = 1.0
    curriculum_radii: tuple = (3.0, 2.0, 1.0)
    curriculum_fractions: tuple = (0.25, 0.5)
    replay_capacity: int = 1_000_000
    checkpoint_every: int = 0
    checkpoint_buffer: bool = True
    persist_taus: bool = False

    def validate(self, training=False):
        if self.scheme not in ("mf", "lb", "fixed"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if training and self.scheme == "fixed":
            raise ConfigError("the fixed-pole scheme has nothing to train")
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if self.eval_episodes <= 0:
            raise ConfigError("eval_episodes must be positive")
        try:
            self.sac_hyper()
            self.vehicle_params()
            self.gust_spec()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def sac_hyper(self):
        return SacHyper(**self.sac)

    def vehicle_params(self):
        return VehicleParams(**self.vehicle)

    def gust_spec(self, offset=0):
        spec = dict(self.gust)
        spec["seed"] = int(spec.get("seed", 0)) + offset
        return GustSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec.items()})

    def to_dict(self):
        return json.loads(json.dumps(dataclasses.asdict(self)))

    @classmethod
    def from_dict(cls, data):
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        kwargs = {}
        for name, value in data.items():
            default = getattr(base, name)
            if isinstance(default, dict):
                extra = set(value) - set(default)
                if extra:
                    raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
                merged = dict(default)
                merged.update(value)
                value = merged
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def build_wind(cfg, evaluation=False):
    if evaluation and cfg.eval_wind_file:
        return load_field(cfg.eval_wind_file)
    if cfg.wind_file:
        return load_field(cfg.wind_file)
    offset = cfg.eval_wind_seed_offset if evaluation else 0
    return generate_procedural(cfg.gust_spec(offset), cfg.gust_extent, cfg.gust_spacing)


def _rngs(seed):
    env_ss, act_ss, train_ss = np.random.SeedSequence(seed).spawn(3)
    return {"env": np.random.default_rng(env_ss), "act": np.random.default_rng(act_ss),
            "train": np.random.default_rng(train_ss)}


class Trainer:
    """Alternates one environment step with one SAC update."""

    def __init__(self, cfg, wind=None):
        cfg.validate(training=True)
        self.cfg = cfg
        self.hyper = cfg.sac_hyper()
        self.params = cfg.vehicle_params()
        self.wind = wind if wind is not None else build_wind(cfg)
        self.rngs = _rngs(cfg.seed)
        self.env = MissionEnv(self.wind, cfg.scheme, self.params, persist_taus=cfg.persist_taus)
        low, high = action_bounds(cfg.scheme, self.params)
        init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
        self.nets = SacNetworks(self.env.state_dim, len(low), low, high, self.hyper, init_rng)
        self.buffer = ReplayBuffer(cfg.replay_capacity)
        self.global_step = 0
        self.episode_index = 0
        self.state = None
        self.ep_return = 0.0
        self.ep_positive = 0
        self.d_reached = None
        self.last_report = None
        self.records = []
        self.events = []

    def _update_curriculum(self):
        cfg = self.cfg
        radius = curriculum_radius(self.global_step, cfg.total_steps, cfg.curriculum_radii,
                                   cfg.curriculum_fractions)
        if radius != self.d_reached:
            self.events.append({"event": "curriculum", "step": self.global_step,
                                "d_reached": radius})
            self.d_reached = radius
        return radius

    def _start_episode(self):
        cfg = self.cfg
        target = sample_target(self.rngs["env"], cfg.train_radius, cfg.altitude)
        self.state = self.env.reset(EpisodeConfig(target, self.d_reached, cfg.train_max_steps))
        self.ep_return = 0.0
        self.ep_positive = 0

    def step(self):
        # the success radius switches at the exact step, even mid-episode
        radius = self._update_curriculum()
        if self.state is None:
            self._start_episode()
        self.env.cfg.d_reached = radius
        action = self.nets.act(self.state, self.rngs["act"])
        out = self.env.step(action)
        self.buffer.push(Transition(self.state, action, out.reward, out.state, out.terminal))
        self.global_step += 1
        self.ep_return += out.reward
        self.ep_positive += out.reward > 0
        report = train_step(self.nets, self.buffer, self.hyper, self.rngs["train"])
        if report is not None:
            self.last_report = report
        self.state = out.state
        if out.done:
            self.records.append({
                "episode": self.episode_index,
                "end_step": self.global_step,
                "steps": self.env.steps,
                "total_reward": self.ep_return,
                "positive_steps": int(self.ep_positive),
                "success": out.info["success"],
                "terminal_kind": "timeout" if out.info["timeout"] else out.info["kind"],
                "d_reached": self.env.cfg.d_reached,
            })
            self.episode_index += 1
            self.state = None
        return out

    def run(self, until=None, out_dir=None, checkpoint_every=None):
        until = self.cfg.total_steps if until is None else min(until, self.cfg.total_steps)
        every = self.cfg.checkpoint_every if checkpoint_every is None else checkpoint_every
        out = Path(out_dir) if out_dir else None
        while self.global_step < until:
            self.step()
            if out and every and self.global_step % every == 0:
                self.flush_logs(out)
                self.save(out / CHECKPOINT_NAME)
        if out:
            self.flush_logs(out)
            self.save(out / CHECKPOINT_NAME)
        return self.records

    def flush_logs(self, out):
        out.mkdir(parents=True, exist_ok=True)
        with open(out / EPISODES_LOG, "a") as fh:
            for rec in self.records[getattr(self, "_flushed", 0):]:
                fh.write(json.dumps(rec) + "\n")
        self._flushed = len(self.records)
        with open(out / EVENTS_LOG, "a") as fh:
            for ev in self.events[getattr(self, "_flushed_events", 0):]:
                fh.write(json.dumps(ev) + "\n")
        self._flushed_events = len(self.events)
        write_aggregates(read_jsonl(out / EPISODES_LOG), out / AGGREGATE_LOG)

    # checkpointing

    def checkpoint_blocks(self):
        state = {"meta/config": ckpt.config_tensor(self.cfg.to_dict()),
                 "meta/counters": np.array([
                     float(self.global_step), float(self.episode_index), self.ep_return,
                     float(self.ep_positive), -1.0 if self.d_reached is None else self.d_reached,
                     float(self.state is not None), float(getattr(self, "_flushed", 0)),
                     float(getattr(self, "_flushed_events", 0))])}
        for name, net in self.nets.nets().items():
            for pname, value in net.params.items():
                state[f"net/{name}/{pname}"] = value
        for name in NETWORK_NAMES:
            opt = self.nets.optim[name]
            state[f"adam/{name}/hyper"] = np.array([opt.lr, opt.beta1, opt.beta2, opt.eps,
                                                    float(opt.step_count)])
            for pname in opt.first_moment:
                state[f"adam/{name}/m/{pname}"] = opt.first_moment[pname]
                state[f"adam/{name}/v/{pname}"] = opt.second_moment[pname]
        state["ctrl/taus"] = np.array([t.as_tuple() for t in self.env.controller.taus])
        if self.state is not None:
            state["env/state"] = self.state
            for key, value in self.env.snapshot().items():
                state[f"env/{key}"] = value
        if self.cfg.checkpoint_buffer and self.buffer.count:
            b = self.buffer
            n = b.count
            state["replay/meta"] = np.array([float(b.count), float(b.write_index)])
            state["replay/states"] = b._states[:n]
            state["replay/actions"] = b._actions[:n]
            state["replay/rewards"] = b._rewards[:n]
            state["replay/next_states"] = b._next[:n]
            state["replay/terminals"] = b._terminals[:n].astype(np.float64)
        norm = {f"norm/{k}": v for k, v in self.env.normalizer.state_arrays().items()}
        rng = {f"rng/{k}": ckpt.rng_to_tensor(g) for k, g in self.rngs.items()}
        return {"state": state, "normalizer": norm, "rng": rng}

    def save(self, path):
        ckpt.save(path, self.checkpoint_blocks())

    @classmethod
    def from_checkpoint(cls, path, overrides=None, wind=None):
        blocks = ckpt.load(path)
        state = blocks["state"]
        data = json.loads(ckpt.tensor_to_text(state["meta/config"]))
        data.update(overrides or {})
        trainer = cls(RunConfig.from_dict(data), wind=wind)
        trainer.restore(blocks)
        return trainer

    def restore(self, blocks):
        state = blocks["state"]
        c = state["meta/counters"]
        self.global_step = int(c[0])
        self.episode_index = int(c[1])
        self.ep_return = float(c[2])
        self.ep_positive = int(c[3])
        self.d_reached = None if c[4] < 0 else float(c[4])
        self._flushed = int(c[6])
        self._flushed_events = int(c[7])
        self.records = [None] * self._flushed
        self.events = [None] * self._flushed_events
        for name, net in self.nets.nets().items():
            for pname in net.params:
                net.params[pname] = state[f"net/{name}/{pname}"].copy()
        for name in NETWORK_NAMES:
            h = state[f"adam/{name}/hyper"]
            opt = AdamState(lr=float(h[0]), beta1=float(h[1]), beta2=float(h[2]),
                            eps=float(h[3]), step_count=int(h[4]))
            for pname in getattr(self.nets, name).params:
                key = f"adam/{name}/m/{pname}"
                if key in state:
                    opt.first_moment[pname] = state[key].copy()
                    opt.second_moment[pname] = state[f"adam/{name}/v/{pname}"].copy()
            self.nets.optim[name] = opt
        self.env.normalizer.load_arrays(
            {k.split("/", 1)[1]: v for k, v in blocks["normalizer"].items()})
        if c[5] > 0:
            snap = {k.split("/", 1)[1]: v for k, v in state.items()
                    if k.startswith("env/") and k != "env/state"}
            self.env.restore(snap)
            self.state = state["env/state"].copy()
        else:
            self.state = None
            self.env.controller = ControllerParams(
                taus=[AxisTaus(*map(float, row)) for row in state["ctrl/taus"]])
        if "replay/meta" in state:
            meta = state["replay/meta"]
            b = self.buffer
            n = int(meta[0])
            b._allocate(state["replay/states"].shape[1], state["replay/actions"].shape[1],
                        max(n, min(b.capacity, 1024)))
            b._states[:n] = state["replay/states"]
            b._actions[:n] = state["replay/actions"]
            b._rewards[:n] = state["replay/rewards"]
            b._next[:n] = state["replay/next_states"]
            b._terminals[:n] = state["replay/terminals"] > 0.5
            b.count = n
            b.write_index = int(meta[1])
        self.rngs = {k.split("/", 1)[1]: ckpt.tensor_to_rng(v) for k, v in blocks["rng"].items()}


def read_jsonl(path):
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def write_aggregates(records, path, window=WINDOW):
    """One row per ``window`` episodes: trailing-window mean reward and success rate."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "end_step", "mean_total_reward", "success_rate"])
        for end in range(window, len(records) + 1, window):
            chunk = records[end - window:end]
            w.writerow([end, chunk[-1]["end_step"],
                        repr(float(np.mean([r["total_reward"] for r in chunk]))),
                        repr(float(np.mean([r["success"] for r in chunk])))])


def train(cfg, out_dir=None, resume=None, steps=None):
    """Run (or resume) training; returns the trainer."""
    out = Path(out_dir or cfg.out_dir)
    if resume:
        overrides = {"total_steps": steps} if steps else None
        trainer = Trainer.from_checkpoint(resume, overrides)
    else:
        trainer = Trainer(cfg)
        out.mkdir(parents=True, exist_ok=True)
        for name in (EPISODES_LOG, EVENTS_LOG):
            (out / name).write_text("")
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    try:
        trainer.run(out_dir=out)
    except NumericError:
        log.error("numeric failure at step %d; last checkpoint kept", trainer.global_step)
        raise
    return trainer


# evaluation

@dataclass
class EvalMetrics:
    episodes: int
    mean_step_number: float
    mean_total_reward: float
    mean_reward_per_step: float
    success_rate: float
    positive_reward_rate: float

    @classmethod
    def from_episodes(cls, rows):
        steps = np.array([r["steps"] for r in rows], dtype=np.float64)
        totals = np.array([r["total_reward"] for r in rows], dtype=np.float64)
        positive = np.array([r["positive_steps"] for r in rows], dtype=np.float64)
        return cls(
            episodes=len(rows),
            mean_step_number=float(steps.mean()),
            mean_total_reward=float(totals.mean()),
            mean_reward_per_step=float(totals.sum() / steps.sum()),
            success_rate=float(np.mean([r["success"] for r in rows])),
            positive_reward_rate=float(positive.sum() / steps.sum()),
        )

    def as_dict(self):
        return dataclasses.asdict(self)


def load_policy(path, scheme=None):
    """Networks, normaliser and stored config from a training checkpoint."""
    blocks = ckpt.load(path)
    state = blocks["state"]
    cfg = RunConfig.from_dict(json.loads(ckpt.tensor_to_text(state["meta/config"])))
    if scheme and scheme != cfg.scheme:
        raise ConfigError(f"checkpoint was trained for scheme {cfg.scheme!r}, not {scheme!r}")
    params = cfg.vehicle_params()
    low, high = action_bounds(cfg.scheme, params)
    sdim = 6 * obs_dim(cfg.scheme)
    nets = SacNetworks(sdim, len(low), low, high, cfg.sac_hyper(), np.random.default_rng(0))
    for name, net in nets.nets().items():
        for pname in net.params:
            key = f"net/{name}/{pname}"
            if key not in state:
                raise ckpt.CheckpointError(f"checkpoint lacks tensor {key}")
            net.params[pname] = state[key].copy()
    norm = Normalizer(obs_dim(cfg.scheme))
    norm.load_arrays({k.split("/", 1)[1]: v for k, v in blocks["normalizer"].items()})
    norm.frozen = True
    return nets, norm, cfg


def eval_targets(cfg, episodes):
    return [sample_target(np.random.default_rng([cfg.seed, i]), cfg.eval_radius, cfg.altitude)
            for i in range(episodes)]


def run_episode(env, cfg_episode, policy=None, trace=False):
    """Roll one episode; ``policy`` maps state -> action (unused for fixed)."""
    state = env.reset(cfg_episode)
    total, positive = 0.0, 0
    path = [env.vehicle.as_list()] if trace else None
    while True:
        action = policy(state) if policy is not None else None
        out = env.step(action)
        total += out.reward
        positive += out.reward > 0
        if trace:
            path.append(env.vehicle.as_list())
        state = out.state
        if out.done:
            break
    row = {"steps": env.steps, "total_reward": total, "positive_steps": int(positive),
           "success": out.info["success"],
           "terminal_kind": "timeout" if out.info["timeout"] else out.info["kind"],
           "target": [float(v) for v in cfg_episode.target]}
    if trace:
        row["trajectory"] = path
    return row


def evaluate(cfg, checkpoint_path=None, scheme=None, episodes=None, wind=None, nets=None,
             normalizer=None, out_dir=None):
    """Deterministic-policy evaluation; returns ``(EvalMetrics, rows)``."""
    scheme = scheme or cfg.scheme
    episodes = episodes or cfg.eval_episodes
    params = cfg.vehicle_params()
    if scheme in ("mf", "lb") and nets is None:
        if checkpoint_path is None:
            raise ConfigError(f"scheme {scheme!r} needs a checkpoint to evaluate")
        nets, normalizer, _ = load_policy(checkpoint_path, scheme)
    wind = wind if wind is not None else build_wind(cfg, evaluation=True)
    if normalizer is None:
        normalizer = Normalizer(obs_dim(scheme))
    normalizer.frozen = True
    env = MissionEnv(wind, scheme, params, normalizer=normalizer, persist_taus=cfg.persist_taus)
    env.training = False
    policy = None
    if scheme in ("mf", "lb"):
        def policy(s):
            return nets.act(s, deterministic=True)
    rows = []
    for i, target in enumerate(eval_targets(cfg, episodes)):
        ep = EpisodeConfig(target, cfg.eval_d_reached, cfg.eval_max_steps)
        row = run_episode(env, ep, policy)
        row["episode"] = i
        rows.append(row)
    metrics = EvalMetrics.from_episodes(rows)
    if out_dir:
        write_eval(Path(out_dir), scheme, metrics, rows)
    return metrics, rows


def write_eval(out, scheme, metrics, rows):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"eval_{scheme}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "steps", "total_reward", "positive_steps", "success",
                    "terminal_kind", "target_x", "target_y", "target_z"])
        for r in rows:
            w.writerow([r["episode"], r["steps"], repr(r["total_reward"]), r["positive_steps"],
                        int(r["success"]), r["terminal_kind"], *r["target"]])
    (out / f"eval_{scheme}.json").write_text(json.dumps(metrics.as_dict(), indent=2))
