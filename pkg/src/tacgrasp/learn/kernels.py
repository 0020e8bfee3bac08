"""Backend selection and the conv3d entry points.

At import time the compiled direct kernels (``_convcore``) are preferred
when they built successfully; otherwise the numpy im2col fallback
(``_convnp``) is used.  ``TACGRASP_KERNELS=py`` or ``=cy`` forces one
side, e.g. for benchmarks/bench_conv.py or for debugging a miscompile.

All tensors are channels-last: activations (B, T, H, W, C), weights
(kt, kh, kw, Cin, Cout).  Convolution is valid cross-correlation (no
padding).  ``conv3d_forward`` returns an opaque context that must be
passed back to ``conv3d_backward`` (the compiled path keeps the input,
the numpy path its im2col matrix).
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError, InvalidInputError

try:
    from . import _convcore

    HAVE_COMPILED = True
except ImportError:  # extension not built; numpy fallback still works
    _convcore = None
    HAVE_COMPILED = False

from . import _convnp

_mode = os.environ.get("TACGRASP_KERNELS", "auto")
if _mode not in ("auto", "py", "cy"):
    raise ConfigError(f"TACGRASP_KERNELS must be auto|py|cy, got {_mode!r}")
if _mode == "cy" and not HAVE_COMPILED:
    raise ConfigError("TACGRASP_KERNELS=cy but the compiled core is unavailable")

USE_COMPILED = HAVE_COMPILED if _mode == "auto" else (_mode == "cy")
BACKEND = "compiled" if USE_COMPILED else "numpy"


def conv_output_shape(in_shape, kernel, stride):
    """(To, Ho, Wo) of a valid convolution; raises if the kernel is too big."""
    t, h, w = in_shape
    kt, kh, kw = kernel
    st, sh, sw = stride
    if kt > t or kh > h or kw > w:
        raise InvalidInputError(f"kernel {kernel} larger than input {in_shape}")
    if min(st, sh, sw) < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    return ((t - kt) // st + 1, (h - kh) // sh + 1, (w - kw) // sw + 1)


# with few input channels the direct kernels beat the GEMM formulation;
# with many, BLAS wins and the compiled core only accelerates the patch
# gather/scatter around it
DIRECT_MAX_CIN = 2


def _compiled_ok(*arrays) -> bool:
    return USE_COMPILED and all(a.dtype in (np.float32, np.float64)
                                for a in arrays)


def _im2col(x, kernel, stride, out_spatial):
    kt, kh, kw = kernel
    b = x.shape[0]
    n = b * int(np.prod(out_spatial))
    if _compiled_ok(x):
        cols = np.empty((n, kt * kh * kw * x.shape[4]), dtype=x.dtype)
        _convcore.im2col(x, kt, kh, kw, *stride, cols)
        return cols
    return _convnp.im2col(x, kernel, stride)


def _col2im(cols, in_shape, kernel, stride):
    if _compiled_ok(cols):
        out = np.zeros(in_shape, dtype=cols.dtype)
        _convcore.col2im(np.ascontiguousarray(cols), *kernel, *stride, out)
        return out
    return _convnp.col2im(cols, in_shape, kernel, stride)


def conv3d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray,
                   stride=(1, 1, 1)):
    """Valid 3-D cross-correlation; returns (output, backward context)."""
    if x.ndim != 5:
        raise InvalidInputError(f"input must be (B,T,H,W,C), got shape {x.shape}")
    kt, kh, kw, cin, cout = weights.shape
    if x.shape[4] != cin:
        raise InvalidInputError(
            f"input has {x.shape[4]} channels, weights expect {cin}"
        )
    out_spatial = conv_output_shape(x.shape[1:4], (kt, kh, kw), stride)
    x = np.ascontiguousarray(x)
    if _compiled_ok(x, weights) and cin <= DIRECT_MAX_CIN:
        out = np.empty((x.shape[0], *out_spatial, cout), dtype=x.dtype)
        _convcore.conv3d_fwd(x, np.ascontiguousarray(weights),
                             np.ascontiguousarray(bias.astype(x.dtype)),
                             *stride, out)
        return out, x
    cols = _im2col(x, (kt, kh, kw), stride, out_spatial)
    out = cols @ weights.reshape(-1, cout)
    out += bias
    return out.reshape(x.shape[0], *out_spatial, cout), (x, cols)


def maxpool3d_forward(x: np.ndarray, pool):
    """Non-overlapping max pool.  Returns (out, ctx) for the backward pass.

    Compiled path: first-max argmax routing.  Numpy path: window-mask
    routing (ties receive the gradient jointly; pools follow relus in
    practice, whose own mask cuts the duplicated zero-ties off).
    """
    b, t, h, w, c = x.shape
    pt, ph, pw = pool
    to, ho, wo = t // pt, h // ph, w // pw
    if _compiled_ok(x) and pt * ph * pw <= 255:
        x = np.ascontiguousarray(x)
        out = np.empty((b, to, ho, wo, c), dtype=x.dtype)
        idx = np.empty((b, to, ho, wo, c), dtype=np.uint8)
        _convcore.maxpool3d_fwd(x, pt, ph, pw, out, idx)
        return out, ("idx", idx)
    win = x[:, : to * pt, : ho * ph, : wo * pw, :].reshape(
        b, to, pt, ho, ph, wo, pw, c)
    out = win.max(axis=(2, 4, 6))
    # ctx keeps its own copy: downstream in-place relu may clobber `out`
    return out, ("mask", win, out.copy())


def maxpool3d_backward(grad_out: np.ndarray, ctx, in_shape, pool):
    b, t, h, w, c = in_shape
    pt, ph, pw = pool
    to, ho, wo = t // pt, h // ph, w // pw
    grad_x = np.zeros(in_shape, dtype=grad_out.dtype)
    if ctx[0] == "idx":
        _convcore.maxpool3d_bwd(np.ascontiguousarray(grad_out), ctx[1],
                                pt, ph, pw, grad_x)
        return grad_x
    _, win, out = ctx
    expand = (slice(None), slice(None), None, slice(None), None,
              slice(None), None, slice(None))
    grad_win = (win == out[expand]) * grad_out[expand]
    grad_x[:, : to * pt, : ho * ph, : wo * pw, :] = grad_win.reshape(
        b, to * pt, ho * ph, wo * pw, c)
    return grad_x


def conv3d_backward(grad_out: np.ndarray, ctx, weights: np.ndarray,
                    in_shape, stride=(1, 1, 1), need_input_grad=True):
    """Gradients of a valid conv3d: (grad_input, grad_weights, grad_bias).

    ``ctx`` is whatever the matching forward returned.  With
    ``need_input_grad=False`` (first layer) grad_input is None.
    """
    grad_out = np.ascontiguousarray(grad_out)
    kt, kh, kw, cin, cout = weights.shape
    if isinstance(ctx, np.ndarray):  # direct path kept the input only
        x = ctx
        gw = np.empty_like(weights)
        gb = np.empty_like(weights, shape=(cout,))
        _convcore.conv3d_bwd_w(x, grad_out, *stride, gw, gb)
        if not need_input_grad:
            return None, gw, gb
        gx = np.zeros(in_shape, dtype=grad_out.dtype)
        _convcore.conv3d_bwd_x(grad_out, np.ascontiguousarray(weights),
                               *stride, gx)
        return gx, gw, gb
    _, cols = ctx
    g2 = grad_out.reshape(-1, cout)
    grad_w = (cols.T @ g2).reshape(weights.shape)
    grad_b = g2.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b
    gcols = g2 @ weights.reshape(-1, cout).T
    grad_x = _col2im(gcols, in_shape, (kt, kh, kw), stride)
    return grad_x, grad_w, grad_b
