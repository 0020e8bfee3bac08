"""Pure-numpy convolution backend (im2col + BLAS GEMM).

Fallback for when the compiled direct kernels are unavailable.  The patch
matrix is built with one strided slice copy per kernel offset, so the
Python-level work is a handful of large vectorized copies; the convolution
itself and the weight gradient are single GEMMs over that matrix.
"""

from __future__ import annotations

import numpy as np


def im2col(x: np.ndarray, kernel, stride) -> np.ndarray:
    b, t, h, w, c = x.shape
    kt, kh, kw = kernel
    st, sh, sw = stride
    to = (t - kt) // st + 1
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    cols = np.empty((b, to, ho, wo, kt, kh, kw, c), dtype=x.dtype)
    for it in range(kt):
        for ih in range(kh):
            for iw in range(kw):
                cols[:, :, :, :, it, ih, iw, :] = x[
                    :,
                    it : it + to * st : st,
                    ih : ih + ho * sh : sh,
                    iw : iw + wo * sw : sw,
                    :,
                ]
    return cols.reshape(b * to * ho * wo, kt * kh * kw * c)


def col2im(cols: np.ndarray, in_shape, kernel, stride) -> np.ndarray:
    b, t, h, w, c = in_shape
    kt, kh, kw = kernel
    st, sh, sw = stride
    to = (t - kt) // st + 1
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    out = np.zeros(in_shape, dtype=cols.dtype)
    view = cols.reshape(b, to, ho, wo, kt, kh, kw, c)
    for it in range(kt):
        for ih in range(kh):
            for iw in range(kw):
                out[
                    :,
                    it : it + to * st : st,
                    ih : ih + ho * sh : sh,
                    iw : iw + wo * sw : sw,
                    :,
                ] += view[:, :, :, :, it, ih, iw, :]
    return out


def forward(x, weights, bias, stride, out_spatial):
    kt, kh, kw, cin, cout = weights.shape
    cols = im2col(x, (kt, kh, kw), stride)
    out = cols @ weights.reshape(-1, cout)
    out += bias
    return out.reshape(x.shape[0], *out_spatial, cout), cols


def backward(grad_out, ctx, weights, in_shape, stride, need_input_grad):
    cols = ctx
    kt, kh, kw, cin, cout = weights.shape
    g2 = grad_out.reshape(-1, cout)
    grad_w = (cols.T @ g2).reshape(weights.shape)
    grad_b = g2.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b
    gcols = g2 @ weights.reshape(-1, cout).T
    grad_x = col2im(gcols, in_shape, (kt, kh, kw), stride)
    return grad_x, grad_w, grad_b
