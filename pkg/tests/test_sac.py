import numpy as np
import pytest

from _fd import check_params
from gustpilot.errors import ShapeError
from gustpilot.replay import Batch, ReplayBuffer, Transition
from gustpilot.sac import (NETWORK_NAMES, SacHyper, SacNetworks, compute_losses, polyak_update,
                           q_target, train_step, v_target_value)

TINY = SacHyper(hidden_dims=(5, 4), batch_size=4)


def tiny_setup(seed=0, alpha=1.0):
    rng = np.random.default_rng(seed)
    hyper = SacHyper(hidden_dims=(5, 4), batch_size=4, alpha=alpha)
    nets = SacNetworks(3, 2, [-1.0, 0.0], [1.0, 2.0], hyper, rng)
    # decouple the value target from the online value net
    for v in nets.v_target.params.values():
        v += rng.normal(scale=0.1, size=v.shape)
    batch = Batch(rng.normal(size=(4, 3)), rng.uniform([-1, 0], [1, 2], size=(4, 2)),
                  rng.normal(size=4), rng.normal(size=(4, 3)), np.array([0, 1, 0, 0], bool))
    noise = rng.normal(size=(4, 2))
    return nets, hyper, batch, noise


def test_q_target_examples():
    assert q_target(1.0, False, 10.0, 0.99) == pytest.approx(10.9)
    assert q_target(1.0, True, 10.0, 0.99) == 1.0
    assert q_target(1.0, False, 10.0, 1e-12) == pytest.approx(1.0)


def test_v_target_examples():
    assert v_target_value(2.0, 1.0, -3.0, 1.0) == 4.0
    assert v_target_value(2.0, 1.0, -3.0, 0.0) == 1.0
    assert v_target_value(0.0, 0.0, 0.0, 1.0) == 0.0
    assert v_target_value(1.0, 2.0, 0.5, 1.0) == v_target_value(2.0, 1.0, 0.5, 1.0)


def test_polyak_examples():
    t = {"w": np.zeros(3)}
    polyak_update({"w": np.ones(3)}, t, 5e-3)
    assert t["w"].tolist() == [0.005] * 3
    polyak_update({"w": np.full(3, 7.0)}, t, 1.0)
    assert t["w"].tolist() == [7.0] * 3
    same = {"w": np.array([1.5, -2.0])}
    polyak_update({"w": np.array([1.5, -2.0])}, same, 0.3)
    assert same["w"].tolist() == [1.5, -2.0]
    with pytest.raises(ShapeError):
        polyak_update({"w": np.ones(2)}, {"w": np.ones(3)}, 0.1)
    with pytest.raises(ValueError):
        polyak_update({"w": np.ones(2)}, {"w": np.ones(2)}, 0.0)


def test_polyak_stays_in_hull():
    rng = np.random.default_rng(0)
    online, old = rng.normal(size=50), rng.normal(size=50)
    t = {"w": old.copy()}
    polyak_update({"w": online}, t, 0.37)
    assert np.all(t["w"] >= np.minimum(old, online) - 1e-15)
    assert np.all(t["w"] <= np.maximum(old, online) + 1e-15)


@pytest.mark.parametrize("seed", [0, 1])
def test_loss_gradients_match_finite_differences(seed):
    nets, hyper, batch, noise = tiny_setup(seed)
    _, grads = compute_losses(nets, batch, hyper, noise)
    field = {"q1": "q1_loss", "q2": "q2_loss", "v": "v_loss", "policy": "policy_loss"}
    for name, attr in field.items():
        net = getattr(nets, name)

        def f():
            return getattr(compute_losses(nets, batch, hyper, noise)[0], attr)

        assert check_params(f, net.params, grads[name]) <= 1e-5, name


def test_q_loss_zero_at_target():
    nets, hyper, batch, noise = tiny_setup()
    one = Batch(batch.states[:1], batch.actions[:1], batch.rewards[:1], batch.next_states[:1],
                np.array([True]))
    q = nets.q1(np.concatenate([one.states, one.actions], axis=1))[0, 0]
    one = Batch(one.states, one.actions, np.array([q]), one.next_states, one.terminals)
    report, _ = compute_losses(nets, one, hyper, noise[:1])
    assert report.q1_loss == 0.0


def test_deterministic_head_policy_loss():
    nets, _, batch, noise = tiny_setup(alpha=0.0)
    hyper = SacHyper(hidden_dims=(5, 4), batch_size=4, alpha=0.0)
    last = nets.policy.params["b1" if "b2" not in nets.policy.params else "b2"]
    nets.policy.params["w2"][:, 2:] = 0.0
    last[2:] = -20.0
    report, _ = compute_losses(nets, batch, hyper, noise)
    acts = np.array([nets.act(s, deterministic=True) for s in batch.states])
    sa = np.concatenate([batch.states, acts], axis=1)
    min_q = np.minimum(nets.q1(sa)[:, 0], nets.q2(sa)[:, 0])
    assert report.policy_loss == pytest.approx(-np.mean(min_q), abs=1e-6)


def test_batch_shape_checked():
    nets, hyper, batch, noise = tiny_setup()
    bad = Batch(batch.states[:, :2], batch.actions, batch.rewards, batch.next_states,
                batch.terminals)
    with pytest.raises(ShapeError):
        compute_losses(nets, bad, hyper, noise)


def _snapshot(nets):
    return {n: {k: v.copy() for k, v in net.params.items()} for n, net in nets.nets().items()}


def test_warm_up_gate_and_full_update():
    nets, hyper, _, _ = tiny_setup()
    buf = ReplayBuffer(100)
    rng = np.random.default_rng(3)
    for _ in range(3):
        buf.push(Transition(rng.normal(size=3), np.array([0.2, 1.0]), 1.0, rng.normal(size=3),
                            False))
    before = _snapshot(nets)
    assert train_step(nets, buf, hyper, rng) is None
    assert all(np.array_equal(before[n][k], v) for n, net in nets.nets().items()
               for k, v in net.params.items())
    buf.push(Transition(rng.normal(size=3), np.array([-0.5, 0.3]), -1.0, rng.normal(size=3), True))
    report = train_step(nets, buf, hyper, rng)
    assert report is not None
    for name in (*NETWORK_NAMES, "v_target"):
        for k, v in getattr(nets, name).params.items():
            assert not np.array_equal(before[name][k], v), (name, k)
    assert all(nets.optim[n].step_count == 1 for n in NETWORK_NAMES)


def test_toy_problem_mean_q_rises():
    """1-D walk: state is a position, the action moves it, reward is -|position|.

    A short horizon and a fast value target let the critic calibrate to the
    random policy early, so the rise that follows reflects policy improvement.
    """
    hyper = SacHyper(hidden_dims=(32, 32), batch_size=32, alpha=0.05, lr=1e-3, gamma=0.9,
                     polyak_tau=0.05)
    rng = np.random.default_rng(0)
    nets = SacNetworks(1, 1, [-0.5], [0.5], hyper, rng)
    buf = ReplayBuffer(10_000)
    x = 0.0
    early, late = [], []
    for t in range(5000):
        if t % 50 == 0:
            x = rng.uniform(-2, 2)
        s = np.array([x])
        a = nets.act(s, rng)
        x = float(np.clip(x + a[0], -3, 3))
        buf.push(Transition(s, a, -abs(x), np.array([x]), False))
        report = train_step(nets, buf, hyper, rng)
        if report is not None:
            (early if t < 1000 else late).append(report.mean_q)
    assert np.mean(late[-500:]) > np.mean(early[:500]) + 1.0


def test_q_loss_decreases_on_linear_problem():
    hyper = SacHyper(hidden_dims=(), batch_size=16, alpha=0.0, lr=1e-2)
    rng = np.random.default_rng(1)
    nets = SacNetworks(2, 1, [-1.0], [1.0], hyper, rng)
    buf = ReplayBuffer(64)
    w = np.array([0.7, -1.3, 0.4])
    for _ in range(64):
        s, a = rng.normal(size=2), rng.uniform(-1, 1, size=1)
        buf.push(Transition(s, a, float(w @ np.r_[s, a]), rng.normal(size=2), True))
    losses = [train_step(nets, buf, hyper, rng).q1_loss for _ in range(100)]
    windows = np.array(losses).reshape(10, 10).mean(axis=1)
    assert np.all(windows[1:] <= 1.05 * windows[:-1])
    assert windows[-1] < 0.5 * windows[0]
