import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from risae.nn import (
    Activation,
    Adam,
    BatchNorm,
    Conv1D,
    Dense,
    DimensionError,
    Sequential,
    StatisticsError,
    TrainSchedule,
    activation,
    conv1d_forward,
    cross_entropy,
    dense_forward,
    grad_check,
    schedule_step,
    softmax,
)
from risae.nn.optim import OptimizerState


def conv_loop(x, w, b):
    bsz, length, c_in = x.shape
    k, _, c_out = w.shape
    pad = (k - 1) // 2
    out = np.zeros((bsz, length, c_out))
    for n in range(bsz):
        for l in range(length):
            for o in range(c_out):
                acc = b[o]
                for t in range(k):
                    src = l + t - pad
                    if 0 <= src < length:
                        for c in range(c_in):
                            acc += x[n, src, c] * w[t, c, o]
                out[n, l, o] = acc
    return out


def test_conv_identity_kernel1():
    x = np.random.default_rng(0).standard_normal((2, 5, 4))
    w = np.eye(4)[None]
    assert np.array_equal(conv1d_forward(x, w, np.zeros(4)), x)


def test_conv_table1_first_layer_width():
    layer = Conv1D(1, 256, 3, np.random.default_rng(0))
    assert layer.forward(np.ones((1, 1, 1))).shape == (1, 1, 256)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_conv_matches_loop(k):
    rng = np.random.default_rng(k)
    x = rng.standard_normal((2, 7, 3))
    w = rng.standard_normal((k, 3, 4))
    b = rng.standard_normal(4)
    ref = conv_loop(x, w, b)
    np.testing.assert_allclose(conv1d_forward(x, w, b), ref, rtol=1e-12, atol=1e-13)


def test_conv_dimension_error_names_axis():
    layer = Conv1D(3, 4, 3, np.random.default_rng(0))
    with pytest.raises(DimensionError, match="axis 2"):
        layer.forward(np.zeros((1, 5, 2)))


def test_conv_kernel1_equals_dense_per_position():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((3, 6, 5))
    w = rng.standard_normal((5, 7))
    b = rng.standard_normal(7)
    np.testing.assert_allclose(conv1d_forward(x, w[None], b), dense_forward(x, w, b), rtol=1e-12, atol=1e-14)


def test_dense_identity_and_ris_width():
    x = np.random.default_rng(0).standard_normal((4, 6))
    assert np.array_equal(dense_forward(x, np.eye(6), np.zeros(6)), x)
    assert Dense(34, 512, np.random.default_rng(0)).forward(np.zeros((1, 34))).shape == (1, 512)
    with pytest.raises(DimensionError):
        dense_forward(x, np.eye(5), np.zeros(5))


def test_dense_matches_loop():
    rng = np.random.default_rng(2)
    x, w, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3)), rng.standard_normal(3)
    ref = np.array([[sum(x[i, j] * w[j, o] for j in range(4)) + b[o] for o in range(3)] for i in range(5)])
    np.testing.assert_allclose(dense_forward(x, w, b), ref, rtol=1e-12)


def test_batchnorm_train_statistics():
    x = np.random.default_rng(3).normal(5.0, 3.0, (1024, 8))
    out = BatchNorm(8).forward(x, training=True)
    np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-6)
    # eps=1e-5 shrinks the variance by var / (var + eps)
    np.testing.assert_allclose(out.var(axis=0), 1, atol=1e-5 / 9 + 1e-6)


def test_batchnorm_constant_column():
    bn = BatchNorm(2)
    bn.params["gamma"][:] = [2.0, 3.0]
    bn.params["beta"][:] = [0.5, -1.0]
    x = np.column_stack([np.full(16, 4.0), np.arange(16.0)])
    out = bn.forward(x, training=True)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[:, 0], 0.5)


def test_batchnorm_infer_uses_running_stats():
    rng = np.random.default_rng(4)
    bn = BatchNorm(3, momentum=0.9, eps=1e-5)
    batches = [rng.normal(i, 1 + i, (32, 3)) for i in range(4)]
    mean = var = None
    for b in batches:
        bn.forward(b, training=True)
        if mean is None:
            mean, var = b.mean(0), b.var(0)
        else:
            mean = 0.9 * mean + 0.1 * b.mean(0)
            var = 0.9 * var + 0.1 * b.var(0)
    held = rng.standard_normal((10, 3))
    np.testing.assert_allclose(bn.forward(held), (held - mean) / np.sqrt(var + 1e-5), rtol=1e-10)


def test_batchnorm_infer_before_train():
    with pytest.raises(StatisticsError):
        BatchNorm(3).forward(np.zeros((2, 3)))


def test_activations():
    assert activation(np.array(0.0), "elu") == 0.0
    assert activation(np.array(1.0), "elu") == 1.0
    assert math.isclose(activation(np.array(-1.0), "elu"), math.exp(-1) - 1, rel_tol=1e-15)
    np.testing.assert_allclose(softmax(np.zeros((1, 4))), [[0.25] * 4])
    x = np.random.default_rng(5).standard_normal((6, 7))
    assert np.array_equal(activation(x, "relu"), np.maximum(0, x))
    assert np.array_equal(activation(x, "linear"), x)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 4), elements=st.floats(-500, 500)))
def test_softmax_rows_stochastic(x):
    s = softmax(x)
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-9)
    for kind in ("elu", "relu", "linear"):
        assert np.all(np.isfinite(activation(x, kind)))


def test_cross_entropy_values():
    onehot = np.eye(3)[[0, 2, 1]]
    loss, _ = cross_entropy(onehot.copy(), onehot)
    assert loss < 1e-10
    loss, _ = cross_entropy(np.full((4, 2), 0.5), np.eye(2)[[0, 1, 1, 0]])
    assert math.isclose(loss, math.log(2), rel_tol=1e-12)
    loss, _ = cross_entropy(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]))
    assert math.isfinite(loss)


def test_cross_entropy_grad_finite_difference():
    rng = np.random.default_rng(6)
    logits = rng.standard_normal((5, 4))
    onehot = np.eye(4)[rng.integers(0, 4, 5)]
    _, grad = cross_entropy(softmax(logits), onehot)
    eps = 1e-6
    num = np.zeros_like(logits)
    for idx in np.ndindex(logits.shape):
        p, m = logits.copy(), logits.copy()
        p[idx] += eps
        m[idx] -= eps
        num[idx] = (cross_entropy(softmax(p), onehot)[0] - cross_entropy(softmax(m), onehot)[0]) / (2 * eps)
    np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-10)


def test_adam_zero_gradient_identity():
    p = {"w": np.array([1.0, -2.0])}
    Adam(lr=0.1).update(p, {"w": np.zeros(2)})
    assert np.array_equal(p["w"], [1.0, -2.0])


@pytest.mark.parametrize("g", [3.7, -0.02, 1e3])
def test_adam_first_step_magnitude(g):
    p = {"w": np.array([0.5])}
    Adam(lr=1e-3).update(p, {"w": np.array([g])})
    assert abs(abs(0.5 - p["w"][0]) - 1e-3) < 1e-6


def test_adam_quadratic_descends():
    p = {"w": np.array([1.0])}
    opt = Adam(lr=0.1)
    losses = []
    for _ in range(10):
        losses.append(float(p["w"][0] ** 2))
        opt.update(p, {"w": 2 * p["w"]})
    losses.append(float(p["w"][0] ** 2))
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert opt.state.step == 10


def test_adam_non_finite_gradient():
    p = {"w": np.ones(3)}
    with pytest.raises(FloatingPointError, match="'w'"):
        Adam().update(p, {"w": np.array([1.0, np.nan, 0.0])})
    assert np.array_equal(p["w"], np.ones(3))


def test_schedule_improving_continues():
    sched = TrainSchedule(max_epochs=100, early_stop_patience=10, lr_plateau_patience=5, lr_factor=0.1)
    st_ = OptimizerState(lr=1e-3)
    hist = []
    for i in range(20):
        hist.append(1.0 - 0.01 * i)
        decision, st_ = schedule_step(sched, hist, st_)
        assert decision == "continue"
    assert st_.lr == 1e-3


def test_schedule_plateau_reduces_lr():
    sched = TrainSchedule(max_epochs=150, early_stop_patience=100, lr_plateau_patience=50, lr_factor=0.1)
    st_ = OptimizerState(lr=1e-3)
    hist = []
    for i in range(50):
        hist.append(0.7)
        decision, st_ = schedule_step(sched, hist, st_)
        if i < 49:
            assert st_.lr == 1e-3
    assert decision == "continue"
    assert math.isclose(st_.lr, 1e-4)


def test_schedule_early_stop():
    sched = TrainSchedule(max_epochs=150, early_stop_patience=100, lr_plateau_patience=50, lr_factor=0.1)
    st_ = OptimizerState(lr=1e-3)
    decisions = [schedule_step(sched, [0.7] * (i + 1), st_)[0] for i in range(100)]
    assert decisions[-1] == "stop"
    assert set(decisions[:-1]) == {"continue"}
    assert math.isclose(st_.lr, 1e-5)


def test_schedule_small_changes_count_as_flat():
    sched = TrainSchedule(max_epochs=10, early_stop_patience=5, lr_plateau_patience=3, lr_factor=0.5)
    st_ = OptimizerState(lr=1.0)
    hist = [1.0, 1.0 - 5e-5, 1.0 - 9e-5]
    decision, st_ = schedule_step(sched, hist, st_)
    assert st_.lr == 0.5


def test_schedule_validation():
    with pytest.raises(ValueError):
        TrainSchedule(lr_factor=1.5)
    with pytest.raises(ValueError):
        TrainSchedule(early_stop_patience=0)


def _ce_model(net, x, onehot, training=False):
    def fn(_):
        logits = net.forward(x, training)
        loss, dlogits = cross_entropy(softmax(logits), onehot)
        net.backward(dlogits)
        return loss, net.named_grads()

    return fn


def test_grad_check_dense():
    rng = np.random.default_rng(7)
    net = Sequential([Dense(5, 4, rng)])
    x = rng.standard_normal((6, 5))
    onehot = np.eye(4)[rng.integers(0, 4, 6)]
    assert grad_check(_ce_model(net, x, onehot), net.named_params(), None, eps=1e-5) < 1e-5


@pytest.mark.parametrize("training", [False, True])
def test_grad_check_conv_bn_elu(training):
    rng = np.random.default_rng(8)
    net = Sequential(
        [Conv1D(3, 6, 3, rng), BatchNorm(6), Activation("elu"), Conv1D(6, 4, 3, rng), BatchNorm(4)]
    )
    x = rng.standard_normal((3, 5, 3))
    net.forward(x, training=True)
    for layer in net.layers:
        if isinstance(layer, BatchNorm):
            layer.params["gamma"][:] = rng.uniform(0.5, 1.5, layer.params["gamma"].shape)
            layer.params["beta"][:] = rng.standard_normal(layer.params["beta"].shape)
    onehot = np.eye(4)[rng.integers(0, 4, (3, 5))]
    err = grad_check(_ce_model(net, x, onehot, training), net.named_params(), None, eps=1e-5)
    assert err < 1e-4


def test_grad_check_detects_corruption():
    rng = np.random.default_rng(9)
    net = Sequential([Dense(5, 4, rng)])
    x = rng.standard_normal((6, 5))
    onehot = np.eye(4)[rng.integers(0, 4, 6)]
    clean = _ce_model(net, x, onehot)

    def corrupted(inputs):
        loss, grads = clean(inputs)
        grads = dict(grads)
        grads["0.weight"] = grads["0.weight"].copy()
        grads["0.weight"][1, 2] *= 2
        return loss, grads

    assert grad_check(corrupted, net.named_params(), None) > 0.1


def test_shapes_deterministic():
    rng = np.random.default_rng(10)
    net = Sequential([Conv1D(2, 8, 3, rng), BatchNorm(8), Activation("elu"), Conv1D(8, 3, 3, rng)])
    for b, l in [(1, 1), (4, 9), (2, 64)]:
        assert net.forward(rng.standard_normal((b, l, 2)), training=True).shape == (b, l, 3)
