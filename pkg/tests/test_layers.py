"""Layer gradient verification against central finite differences.

All checks run in float64 (the layers are dtype-polymorphic) with
epsilon 1e-3; analytic gradients must match to a relative error below
1e-4.  The acceptance suite repeats these checks across 100 seeds.
"""

import numpy as np
import pytest

from tacgrasp.learn import layers as L
from tacgrasp.learn.network import Network, parse_spec
from tacgrasp.errors import InvalidInputError

EPS = 1e-3
TOL = 1e-4


def rel_error(a, b):
    """Max deviation scaled by the gradient magnitude.

    Pointwise relative error blows up on elements whose true gradient is
    ~0 (finite-difference truncation dominates there), so errors are
    normalized by the largest entry instead.
    """
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / scale


def numeric_grad(f, arr):
    grad = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + EPS
        f_plus = f()
        flat[i] = orig - EPS
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2 * EPS)
    return grad


def check_layer(layer, x, seed=0, training=True):
    """Verify d(sum(r * forward(x)))/dx and /dparams for a random r.

    forward always receives a copy: relu clips its input buffer in place.
    The projection seed is offset from the input seed; with r == x the
    batch-norm directional gradient degenerates to ~0.
    """
    rng = np.random.default_rng(seed + 1000)
    out = layer.forward(x.copy(), training=training,
                        rng=np.random.default_rng(1))
    r = rng.standard_normal(out.shape)

    def loss():
        # dropout must redraw the same mask, so reseed its generator
        return float(np.sum(r * layer.forward(
            x.copy(), training=training, rng=np.random.default_rng(1))))

    layer.forward(x.copy(), training=training, rng=np.random.default_rng(1))
    grad_x = layer.backward(r.copy())
    if grad_x is not None:
        assert rel_error(grad_x, numeric_grad(loss, x)) < TOL
    for param, grad in zip(layer.params(), layer.grads()):
        assert rel_error(grad, numeric_grad(loss, param)) < TOL


def build(layer, in_shape, seed=0):
    layer.build(in_shape, np.random.default_rng(seed), 0.1, np.float64)
    return layer


@pytest.mark.parametrize("seed", range(4))
def test_conv3d_gradients(seed):
    rng = np.random.default_rng(seed)
    layer = build(L.Conv3D(3, (2, 2, 2)), (3, 4, 5, 2), seed)
    check_layer(layer, rng.standard_normal((2, 3, 4, 5, 2)), seed)


def test_conv3d_strided_gradients():
    rng = np.random.default_rng(7)
    layer = build(L.Conv3D(2, (2, 3, 3), stride=(1, 2, 2)), (3, 6, 7, 1))
    check_layer(layer, rng.standard_normal((2, 3, 6, 7, 1)))


@pytest.mark.parametrize("seed", range(4))
def test_dense_gradients(seed):
    rng = np.random.default_rng(seed)
    layer = build(L.Dense(4), (6,), seed)
    check_layer(layer, rng.standard_normal((3, 6)), seed)


@pytest.mark.parametrize("seed", range(4))
def test_batchnorm_gradients_train_mode(seed):
    rng = np.random.default_rng(seed)
    layer = build(L.BatchNorm(), (3, 4, 2), seed)
    check_layer(layer, rng.standard_normal((4, 3, 4, 2)), seed)


def test_batchnorm_gradients_eval_mode():
    rng = np.random.default_rng(3)
    layer = build(L.BatchNorm(), (5,))
    layer.running_mean[:] = rng.standard_normal(5)
    layer.running_var[:] = 0.5 + rng.random(5)
    check_layer(layer, rng.standard_normal((4, 5)), training=False)


def test_relu_and_flatten_gradients():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 4, 2))
    x[np.abs(x) < 0.05] += 0.2  # keep away from the kink
    check_layer(L.ReLU(), x)
    check_layer(build(L.Flatten(), (4, 2)), rng.standard_normal((3, 4, 2)))


def test_maxpool_gradients_tie_free():
    rng = np.random.default_rng(6)
    layer = build(L.MaxPool3D((1, 2, 2)), (2, 4, 4, 2))
    x = rng.standard_normal((2, 2, 4, 4, 2))
    check_layer(layer, x)


def test_dropout_eval_is_identity_with_gradient():
    rng = np.random.default_rng(8)
    layer = L.Dropout(0.6)
    x = rng.standard_normal((4, 7))
    out = layer.forward(x.copy(), training=False)
    assert np.array_equal(out, x)
    check_layer(layer, x, training=False)


def test_dropout_train_mode_scaling():
    rng = np.random.default_rng(9)
    layer = L.Dropout(0.5)
    x = np.ones((2000, 10))
    out = layer.forward(x, training=True, rng=rng)
    kept = out[out != 0]
    assert np.allclose(kept, 2.0)  # inverted dropout scaling
    assert abs((out != 0).mean() - 0.5) < 0.05
    assert L.Dropout(0.0).forward(x, training=True,
                                  rng=rng) is x  # rate 0 is identity


def test_softmax_xent_fused_gradient():
    rng = np.random.default_rng(10)
    for seed in range(4):
        rng = np.random.default_rng(seed)
        logits = rng.standard_normal((5, 4))
        labels = rng.integers(0, 4, 5)
        softmax = L.Softmax()

        def loss():
            return L.cross_entropy(softmax.forward(logits), labels)

        probs = softmax.forward(logits)
        analytic = L.softmax_xent_grad(probs, labels)
        assert rel_error(analytic, numeric_grad(loss, logits)) < TOL


def test_softmax_jacobian_backward_matches_fused():
    # chaining dL/dp through the generic softmax backward must equal the
    # fused (p - onehot)/batch expression
    rng = np.random.default_rng(11)
    logits = rng.standard_normal((6, 5))
    labels = rng.integers(0, 5, 6)
    softmax = L.Softmax()
    probs = softmax.forward(logits)
    onehot_grad = np.zeros_like(probs)
    onehot_grad[np.arange(6), labels] = -1.0 / (probs[np.arange(6), labels] * 6)
    via_jacobian = softmax.backward(onehot_grad)
    fused = L.softmax_xent_grad(probs, labels)
    assert np.allclose(via_jacobian, fused, atol=1e-12)


def test_softmax_rows_sum_to_one(rng):
    logits = rng.standard_normal((8, 12)) * 30
    probs = L.Softmax().forward(logits)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)
    assert (probs >= 0).all()


def test_cross_entropy_nonnegative(rng):
    probs = L.Softmax().forward(rng.standard_normal((16, 4)))
    labels = rng.integers(0, 4, 16)
    assert L.cross_entropy(probs, labels) >= 0.0


def test_batchnorm_train_statistics(rng):
    layer = build(L.BatchNorm(), (6,))
    x = rng.standard_normal((4096, 6)) * 3.0 + 5.0
    out = layer.forward(x, training=True)
    assert np.abs(out.mean(axis=0)).max() < 1e-3
    assert np.abs(out.var(axis=0) - 1.0).max() < 1e-2


def test_batchnorm_eval_is_affine(rng):
    layer = build(L.BatchNorm(), (3,))
    layer.running_mean[:] = [1.0, -2.0, 0.5]
    layer.running_var[:] = [4.0, 1.0, 0.25]
    x = rng.standard_normal((10, 3))
    out1 = layer.forward(x, training=False)
    out2 = layer.forward(2 * x, training=False)
    # affine: f(2x) - f(x) == f(3x) - f(2x)
    out3 = layer.forward(3 * x, training=False)
    assert np.allclose(out2 - out1, out3 - out2, atol=1e-10)


def test_network_spec_validation():
    with pytest.raises(InvalidInputError):
        parse_spec("conv3d:3x3x3x16 relu")  # missing softmax
    with pytest.raises(InvalidInputError):
        parse_spec("softmax dense:4 softmax")  # not terminal / duplicated
    with pytest.raises(InvalidInputError):
        parse_spec("dense:abc softmax")
    with pytest.raises(InvalidInputError):
        Network("frobnicate softmax", (4,))


def test_network_shape_inference():
    net = Network("conv3d:3x3x3x16 relu maxpool:1x2x2 conv3d:3x3x3x32 relu "
                  "maxpool:2x2x2 flatten dense:128 relu dropout:0.5 dense:8 "
                  "softmax", (8, 60, 120, 1))
    assert net.output_shape == (8,)
    x = np.random.default_rng(0).random((2, 8, 60, 120, 1)).astype(np.float32)
    probs = net.forward(x)
    assert probs.shape == (2, 8)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)


def test_network_full_gradcheck_small():
    # end-to-end parameter gradient check on a tiny all-layer network
    net = Network("conv3d:2x2x2x3 batchnorm relu maxpool:1x2x2 flatten "
                  "dense:5 relu dropout:0.0 dense:3 softmax",
                  (3, 4, 6, 2), seed=1, dtype=np.float64)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 3, 4, 6, 2))
    labels = rng.integers(0, 3, 4)
    net.loss_and_grads(x, labels)
    analytic = [g.copy() for g in net.grads()]

    def loss():
        probs = net.forward(x, training=True)
        return L.cross_entropy(probs, labels)

    for param, ga in zip(net.params(), analytic):
        gn = numeric_grad(loss, param)
        assert rel_error(ga, gn) < TOL
