import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _fd import check_params, max_rel_error, numeric_grad
from gustpilot.errors import NumericError, ShapeError
from gustpilot.nn import (LOG_STD_MAX, LOG_STD_MIN, AdamState, Mlp, MlpSpec, adam_step,
                          init_params, mlp_forward, mlp_gradients, split_head, squashed_grads,
                          squashed_mean, squashed_sample)


def test_zero_weights_give_bias():
    spec = MlpSpec(3, (4,), 2)
    params = {"w0": np.zeros((3, 4)), "b0": np.zeros(4), "w1": np.zeros((4, 2)),
              "b1": np.array([0.5, -1.5])}
    assert mlp_forward(spec, params, np.array([1.0, 2.0, 3.0])).tolist() == [0.5, -1.5]


def test_identity_linear_layer():
    spec = MlpSpec(3, (), 3)
    params = {"w0": np.eye(3), "b0": np.zeros(3)}
    x = np.array([0.2, -4.0, 7.0])
    assert np.array_equal(mlp_forward(spec, params, x), x)


def test_hand_evaluated_2_3_1():
    spec = MlpSpec(2, (3,), 1, slope=0.01)
    params = {"w0": np.array([[0.5, -1.0, 0.25], [2.0, 0.5, -0.75]]),
              "b0": np.array([0.1, 0.0, -0.2]),
              "w1": np.array([[1.0], [-2.0], [0.5]]), "b1": np.array([0.3])}
    # x = (1, -1): pre-activations (0.5-2+0.1, -1-0.5, 0.25+0.75-0.2) = (-1.4, -1.5, 0.8)
    # leaky: (-0.014, -0.015, 0.8); output -0.014 + 0.03 + 0.4 + 0.3
    out = mlp_forward(spec, params, np.array([1.0, -1.0]))
    assert out[0] == pytest.approx(0.716, abs=1e-15)


def test_shape_errors():
    spec = MlpSpec(2, (3,), 1)
    params = init_params(spec, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        mlp_forward(spec, params, np.zeros(3))
    with pytest.raises(ShapeError):
        mlp_gradients(spec, params, np.zeros(2), np.zeros(2))
    with pytest.raises(ShapeError):
        MlpSpec(0, (3,), 1)


def test_forward_is_pure_and_batched():
    net = Mlp(MlpSpec(4, (8, 8), 2), np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(5, 4))
    a, b = net(x), net(x)
    assert a.tobytes() == b.tobytes()
    np.testing.assert_allclose(net(x[3]), a[3], rtol=0, atol=1e-15)


def test_init_bounds():
    params = init_params(MlpSpec(16, (9,), 1), np.random.default_rng(0))
    assert np.all(np.abs(params["w0"]) <= 0.25) and np.all(np.abs(params["w1"]) <= 1 / 3)


def test_zero_upstream_zero_grads():
    spec = MlpSpec(3, (5,), 2)
    params = init_params(spec, np.random.default_rng(0))
    grads, gin = mlp_gradients(spec, params, np.ones(3), np.zeros(2))
    assert all(not g.any() for g in grads.values()) and not gin.any()


def test_scalar_chain_rule():
    spec = MlpSpec(1, (), 1)
    params = {"w0": np.array([[3.0]]), "b0": np.array([0.0])}
    grads, gin = mlp_gradients(spec, params, np.array([2.0]), np.array([1.0]))
    assert grads["w0"][0, 0] == 2.0 and gin[0] == 3.0


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    spec = MlpSpec(4, (6, 5), 3)
    params = init_params(spec, rng)
    x = rng.normal(size=(7, 4))
    up = rng.normal(size=(7, 3))

    def f():
        return float(np.sum(up * mlp_forward(spec, params, x)))

    grads, gin = mlp_gradients(spec, params, x, up)
    assert check_params(f, params, grads) <= 1e-5
    assert max_rel_error(gin, numeric_grad(f, x)) <= 1e-5


def test_adam_zero_gradient_fixpoint():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState())
    assert p["w"].tolist() == [1.0, -2.0]


def test_adam_first_step_magnitude():
    p = {"w": np.array([0.0])}
    st_ = AdamState(lr=3e-4)
    adam_step(p, {"w": np.array([1.0])}, st_)
    # m_hat = v_hat = 1, so the step is lr / (1 + eps)
    assert p["w"][0] == pytest.approx(-3e-4 / (1 + 1e-8), rel=1e-12)
    assert p["w"][0] == pytest.approx(-2.99999e-4, abs=1e-9)
    first = -p["w"][0]
    adam_step(p, {"w": np.array([1.0])}, st_)
    assert -p["w"][0] - first <= first
    assert st_.step_count == 2


def test_adam_rejects_non_finite():
    with pytest.raises(NumericError, match="'w1'"):
        adam_step({"w1": np.zeros(2)}, {"w1": np.array([0.0, np.inf])}, AdamState())


def test_squashed_reference_values():
    s = squashed_sample(np.zeros(2), np.zeros(2), [-1, -1], [1, 1], np.zeros(2))
    assert s.action.tolist() == [0.0, 0.0]
    assert s.log_prob == pytest.approx(2 * -0.5 * math.log(2 * math.pi), abs=1e-12)
    mid = squashed_sample(np.zeros(1), np.zeros(1), [0.0], [10.0], np.zeros(1))
    assert mid.action[0] == 5.0


@given(st.floats(-30, 30), st.floats(-25, 5), st.floats(-8, 8))
def test_action_inside_open_box(mean, log_std, noise):
    lo, hi = np.array([-0.01]), np.array([0.01])
    a = squashed_sample(np.array([mean]), np.array([log_std]), lo, hi, np.array([noise])).action
    assert lo[0] < a[0] < hi[0]


def test_zero_noise_is_deterministic_squash():
    mean = np.array([0.3, -1.2])
    lo, hi = np.array([0.0, -2.0]), np.array([4.0, 2.0])
    a = squashed_sample(mean, np.full(2, 1.5), lo, hi, np.zeros(2)).action
    np.testing.assert_array_equal(a, squashed_mean(mean, lo, hi))
    np.testing.assert_allclose(a, lo + (np.tanh(mean) + 1) * (hi - lo) / 2, rtol=1e-15)


@pytest.mark.parametrize("mean, log_std", [(0.0, 0.0), (0.7, -0.5), (-1.5, 0.4)])
def test_log_prob_integrates_to_one(mean, log_std):
    lo, hi = 2.0, 5.0
    # integrate exp(log_prob) over the action interval via the pre-tanh variable
    u = np.linspace(-12.0, 12.0, 400_001)
    noise = (u - mean) / math.exp(log_std)
    s = squashed_sample(np.full((len(u), 1), mean), np.full((len(u), 1), log_std),
                        [lo], [hi], noise[:, None])
    a = lo + (np.tanh(u) + 1) * (hi - lo) / 2
    density = np.exp(s.log_prob)
    mass = np.sum(0.5 * (density[1:] + density[:-1]) * np.diff(a))
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_split_head_clamps_and_masks():
    mean, log_std, active = split_head(np.array([0.1, 0.2, -30.0, 1.0]), 2)
    assert mean.tolist() == [0.1, 0.2]
    assert log_std.tolist() == [LOG_STD_MIN, 1.0]
    assert active.tolist() == [False, True]
    _, log_std, _ = split_head(np.array([0.0, 9.0]), 1)
    assert log_std[0] == LOG_STD_MAX


def test_squashed_grads_match_finite_differences():
    rng = np.random.default_rng(4)
    mean = rng.normal(size=(3, 2))
    log_std = rng.uniform(-1, 0.5, size=(3, 2))
    noise = rng.normal(size=(3, 2))
    lo, hi = np.array([-1.0, 0.0]), np.array([2.0, 0.5])
    wl, wa = rng.normal(size=3), rng.normal(size=(3, 2))

    def f():
        s = squashed_sample(mean, log_std, lo, hi, noise)
        return float(np.sum(wl * s.log_prob) + np.sum(wa * s.action))

    s = squashed_sample(mean, log_std, lo, hi, noise)
    dmean, dlog_std = squashed_grads(s, lo, hi, wl, wa)
    assert max_rel_error(dmean, numeric_grad(f, mean, 1e-6)) <= 1e-5
    assert max_rel_error(dlog_std, numeric_grad(f, log_std, 1e-6)) <= 1e-5
