"""Analytic gradients vs central finite differences for every layer kind."""

import numpy as np
import pytest

from lanelab.nncore import LayerSpec, Network
from lanelab.nncore.losses import mse_loss, mse_loss_grad

STEP = 1e-5
REL_TOL = 1e-4


def _loss(network, x, target):
    pred = network.forward(x, train=True)
    return mse_loss(pred, target)


def _check_network(specs, in_shape, seed=0, batch=2):
    """Finite-difference check on every parameter component of a small net."""
    rng = np.random.default_rng(seed)
    net = Network(specs, in_shape, rng=rng)
    x = rng.normal(size=(batch,) + tuple(in_shape)) * 0.5
    target = rng.normal(size=(batch,) + tuple(net.output_shape)) * 0.5
    pred = net.forward(x, train=True)
    grads = net.backward(mse_loss_grad(pred, target))
    params = net.param_dict()
    assert set(grads) == set(params)

    for name, p in params.items():
        flat = p.reshape(-1)
        gflat = grads[name].reshape(-1)
        # probe a bounded number of components per tensor to keep runtime sane
        idxs = np.linspace(0, flat.size - 1, min(flat.size, 6)).astype(int)
        for i in np.unique(idxs):
            orig = flat[i]
            flat[i] = orig + STEP
            lp = _loss(net, x, target)
            flat[i] = orig - STEP
            lm = _loss(net, x, target)
            flat[i] = orig
            numeric = (lp - lm) / (2 * STEP)
            analytic = gflat[i]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            assert abs(numeric - analytic) / denom < REL_TOL, (
                f"{name}[{i}]: analytic {analytic}, numeric {numeric}"
            )


def test_conv2d_gradients():
    _check_network(
        [
            LayerSpec("conv2d", {"filters": 3, "kernel": (3, 3), "stride": 2, "padding": "same"}),
            LayerSpec("relu"),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (6, 6, 2),
    )


def test_conv3d_gradients():
    _check_network(
        [
            LayerSpec("conv3d", {"filters": 2, "kernel": (2, 3, 3), "padding": "valid"}),
            LayerSpec("tanh"),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (3, 6, 6, 2),
    )


def test_convlstm_gradients_sequence_input():
    _check_network(
        [
            LayerSpec("convlstm2d", {"filters": 2, "kernel": (3, 3), "return_sequences": True}),
            LayerSpec("convlstm2d", {"filters": 2, "kernel": (3, 3)}),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (3, 6, 6, 2),
    )


def test_convlstm_gradients_single_frame():
    _check_network(
        [
            LayerSpec("convlstm2d", {"filters": 2, "kernel": (3, 3)}),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (6, 6, 2),
    )


def test_dense_sigmoid_gradients():
    _check_network(
        [
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 5}),
            LayerSpec("sigmoid"),
            LayerSpec("dense", {"units": 2}),
        ],
        (6, 6, 1),
    )


def test_head_gradients():
    _check_network(
        [
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
            LayerSpec("head_sigmoid_tanh"),
        ],
        (6, 6, 1),
    )


def test_maxpool2d_gradients():
    _check_network(
        [
            LayerSpec("conv2d", {"filters": 2, "kernel": (3, 3)}),
            LayerSpec("maxpool2d", {"window": (2, 2)}),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (6, 6, 2),
    )


def test_maxpool3d_gradients():
    _check_network(
        [
            LayerSpec("conv3d", {"filters": 2, "kernel": (2, 3, 3)}),
            LayerSpec("maxpool3d", {"window": (2, 2, 2)}),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (3, 6, 6, 2),
    )


def test_time_distributed_gradients():
    inner = LayerSpec("conv2d", {"filters": 2, "kernel": (3, 3)})
    _check_network(
        [
            LayerSpec("time_distributed", {"inner": inner}),
            LayerSpec("relu"),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (3, 6, 6, 2),
    )


def test_single_dense_closed_form():
    # d(mse)/dW = 2/size * x^T (xW + b - t)
    rng = np.random.default_rng(1)
    net = Network([LayerSpec("dense", {"units": 2})], (4,), rng=rng)
    x = rng.normal(size=(3, 4))
    t = rng.normal(size=(3, 2))
    pred = net.forward(x, train=True)
    grads = net.backward(mse_loss_grad(pred, t))
    W = net.param_dict()["00.dense.kernel"]
    b = net.param_dict()["00.dense.bias"]
    resid = x @ W + b - t
    want_W = (2.0 / pred.size) * x.T @ resid
    want_b = (2.0 / pred.size) * resid.sum(axis=0)
    assert np.max(np.abs(grads["00.dense.kernel"] - want_W)) < 1e-12
    assert np.max(np.abs(grads["00.dense.bias"] - want_b)) < 1e-12


def test_zero_gradient_at_exact_minimum():
    rng = np.random.default_rng(2)
    net = Network(
        [LayerSpec("flatten"), LayerSpec("dense", {"units": 2})], (3, 3, 1), rng=rng
    )
    x = rng.normal(size=(2, 3, 3, 1))
    target = net.forward(x, train=True)  # loss is exactly zero at this target
    grads = net.backward(mse_loss_grad(target, target))
    for g in grads.values():
        assert np.all(g == 0.0)


def test_backward_forward_value_consistent():
    # the train=True forward used for backprop equals the plain forward bit-for-bit
    rng = np.random.default_rng(3)
    net = Network(
        [
            LayerSpec("conv2d", {"filters": 2, "kernel": (3, 3)}),
            LayerSpec("relu"),
            LayerSpec("flatten"),
            LayerSpec("dense", {"units": 2}),
        ],
        (6, 6, 1),
        rng=rng,
    )
    x = rng.normal(size=(2, 6, 6, 1))
    assert np.array_equal(net.forward(x, train=True), net.forward(x))
