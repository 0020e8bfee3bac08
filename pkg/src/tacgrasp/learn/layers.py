"""Network layers with explicit forward/backward passes.

Every layer works on channels-last arrays and keeps whatever it needs for
the backward pass on itself.  Parameters and their gradients are exposed
as parallel lists so the optimizer stays layer-agnostic.  Layers are
dtype-polymorphic: training runs float32, gradient verification runs the
same code in float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError, NumericError
from . import kernels


class Layer:
    """Base class; stateless layers only override forward/backward."""

    def build(self, in_shape, rng, init_std, dtype):
        """Resolve parameter shapes for ``in_shape`` (no batch dim); returns
        the output shape."""
        return in_shape

    def params(self):
        return []

    def grads(self):
        return []

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def spec_token(self) -> str:
        raise NotImplementedError

    def extra_state(self):
        """Non-trainable arrays that must persist in checkpoints."""
        return []


class Conv3D(Layer):
    """Valid 3-D cross-correlation, channels-last, no padding.

    ``skip_input_grad`` is set by the network builder on the first layer:
    nothing consumes the gradient w.r.t. the raw input, and for the wide
    first convolution the col2im scatter is a large share of step time.
    """

    def __init__(self, out_channels: int, kernel=(3, 3, 3), stride=(1, 1, 1)):
        if out_channels < 1:
            raise InvalidInputError("out_channels must be >= 1")
        self.out_channels = out_channels
        self.kernel = tuple(kernel)
        self.stride = tuple(stride)
        self.skip_input_grad = False
        self.w = None
        self.b = None
        self.gw = None
        self.gb = None
        self._ctx = None
        self._in_shape = None

    def build(self, in_shape, rng, init_std, dtype):
        if len(in_shape) != 4:
            raise InvalidInputError(f"conv3d expects (T,H,W,C) input, got {in_shape}")
        t, h, w, c = in_shape
        kt, kh, kw = self.kernel
        out_spatial = kernels.conv_output_shape((t, h, w), self.kernel, self.stride)
        self.w = rng.normal(0.0, init_std,
                            (kt, kh, kw, c, self.out_channels)).astype(dtype)
        self.b = np.zeros(self.out_channels, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        return (*out_spatial, self.out_channels)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, training=False, rng=None):
        out, ctx = kernels.conv3d_forward(x, self.w, self.b, self.stride)
        self._ctx = ctx if training else None
        self._in_shape = x.shape
        return out

    def backward(self, grad_out):
        grad_x, gw, gb = kernels.conv3d_backward(
            grad_out, self._ctx, self.w, self._in_shape, self.stride,
            need_input_grad=not self.skip_input_grad,
        )
        self.gw[...] = gw
        self.gb[...] = gb
        self._ctx = None
        return grad_x

    def spec_token(self):
        kt, kh, kw = self.kernel
        token = f"conv3d:{kt}x{kh}x{kw}x{self.out_channels}"
        if self.stride != (1, 1, 1):
            token += ":s" + "x".join(str(s) for s in self.stride)
        return token


class ReLU(Layer):
    def forward(self, x, training=False, rng=None):
        # clip in place: the upstream layer's output buffer is ours
        out = np.maximum(x, 0, out=x)
        self._out = out
        return out

    def backward(self, grad_out):
        grad = grad_out * (self._out > 0)
        self._out = None
        return grad

    def spec_token(self):
        return "relu"


class MaxPool3D(Layer):
    """Non-overlapping max pooling; trailing remainders are dropped."""

    def __init__(self, pool=(2, 2, 2)):
        if min(pool) < 1:
            raise InvalidInputError(f"pool sizes must be >= 1, got {pool}")
        self.pool = tuple(pool)

    def build(self, in_shape, rng, init_std, dtype):
        t, h, w, c = in_shape
        pt, ph, pw = self.pool
        if t < pt or h < ph or w < pw:
            raise InvalidInputError(f"pool {self.pool} larger than input {in_shape}")
        return (t // pt, h // ph, w // pw, c)

    def forward(self, x, training=False, rng=None):
        self._in_shape = x.shape
        out, ctx = kernels.maxpool3d_forward(x, self.pool)
        self._ctx = ctx if training else None
        return out

    def backward(self, grad_out):
        grad_x = kernels.maxpool3d_backward(grad_out, self._ctx,
                                            self._in_shape, self.pool)
        self._ctx = None
        return grad_x

    def spec_token(self):
        return "maxpool:" + "x".join(str(p) for p in self.pool)


class Flatten(Layer):
    def build(self, in_shape, rng, init_std, dtype):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, rng=None):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._in_shape)

    def spec_token(self):
        return "flatten"


class Dense(Layer):
    def __init__(self, units: int):
        if units < 1:
            raise InvalidInputError("units must be >= 1")
        self.units = units
        self.w = None
        self.b = None

    def build(self, in_shape, rng, init_std, dtype):
        if len(in_shape) != 1:
            raise InvalidInputError(
                f"dense expects flattened input, got shape {in_shape}"
            )
        self.w = rng.normal(0.0, init_std, (in_shape[0], self.units)).astype(dtype)
        self.b = np.zeros(self.units, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        return (self.units,)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, training=False, rng=None):
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out):
        self.gw[...] = self._x.T @ grad_out
        self.gb[...] = grad_out.sum(axis=0)
        self._x = None
        return grad_out @ self.w.T

    def spec_token(self):
        return f"dense:{self.units}"


class Dropout(Layer):
    """Inverted dropout; identity in eval mode and at rate 0."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise InvalidInputError(f"dropout rate must be in [0,1), got {rate}")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise InvalidInputError("dropout in training mode needs an rng")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad_out):
        if self._mask is None:
            return grad_out
        return grad_out * self._mask

    def spec_token(self):
        return f"dropout:{self.rate:g}"


class BatchNorm(Layer):
    """Per-channel normalization over all leading axes (channels-last)."""

    def __init__(self, momentum: float = 0.1, eps: float = 1e-5):
        self.momentum = momentum
        self.eps = eps

    def build(self, in_shape, rng, init_std, dtype):
        c = in_shape[-1]
        self.gamma = np.ones(c, dtype=dtype)
        self.beta = np.zeros(c, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)
        return in_shape

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.ggamma, self.gbeta]

    def extra_state(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, training=False, rng=None):
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
            self._n = x.size // x.shape[-1]
        else:
            mean, var = self.running_mean, self.running_var
        self._std = np.sqrt(var + self.eps)
        self._xhat = (x - mean) / self._std
        self._training = training
        return self.gamma * self._xhat + self.beta

    def backward(self, grad_out):
        axes = tuple(range(grad_out.ndim - 1))
        self.ggamma[...] = (grad_out * self._xhat).sum(axis=axes)
        self.gbeta[...] = grad_out.sum(axis=axes)
        if not self._training:
            return grad_out * (self.gamma / self._std)
        n = self._n
        gxhat = grad_out * self.gamma
        return (
            gxhat
            - gxhat.mean(axis=axes)
            - self._xhat * (gxhat * self._xhat).mean(axis=axes)
        ) / self._std

    def spec_token(self):
        return "batchnorm"


class Softmax(Layer):
    """Terminal class-probability layer (rows sum to 1)."""

    def forward(self, x, training=False, rng=None):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self._probs = e / e.sum(axis=1, keepdims=True)
        return self._probs

    def backward(self, grad_out):
        p = self._probs
        inner = (grad_out * p).sum(axis=1, keepdims=True)
        return p * (grad_out - inner)

    def spec_token(self):
        return "softmax"


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of integer ``labels`` under ``probs``."""
    if probs.ndim != 2 or labels.shape[0] != probs.shape[0]:
        raise InvalidInputError("probs must be (batch, classes) matching labels")
    picked = probs[np.arange(labels.shape[0]), labels]
    loss = float(-np.log(np.maximum(picked, 1e-12)).mean())
    if not np.isfinite(loss):
        raise NumericError("non-finite cross-entropy loss")
    return loss


def softmax_xent_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy w.r.t. the softmax *logits*.

    (p - onehot) / batch; used by the trainer in place of chaining the
    generic softmax backward through -1/p factors.
    """
    grad = probs.copy()
    grad[np.arange(labels.shape[0]), labels] -= 1.0
    return grad / labels.shape[0]
