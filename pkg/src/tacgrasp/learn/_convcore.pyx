# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled direct 3-D convolution kernels (the training hot loop).

Forward, weight-gradient and input-gradient passes walk the sliding
windows in place instead of materializing the im2col matrix the numpy
fallback (tacgrasp.learn._convnp) builds, which removes the dominant
memory traffic of a training step.  Activations are channels-last
(B, T, H, W, C) and weights (kt, kh, kw, C, OC).

Work is blocked one output row (all Wo positions) at a time with an
L1-resident accumulator, so the innermost (wo, oc) loops stream over
contiguous memory and auto-vectorize; each thread owns whole batch items,
keeping the accumulation race-free.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport parallel, prange, threadid

cimport openmp

ctypedef fused floating:
    float
    double


def conv3d_fwd(floating[:, :, :, :, ::1] x, floating[:, :, :, :, ::1] w,
               floating[::1] bias, int st, int sh, int sw,
               floating[:, :, :, :, ::1] out):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[4]
    cdef Py_ssize_t kt = w.shape[0], kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t OC = w.shape[4]
    cdef Py_ssize_t To = out.shape[1], Ho = out.shape[2], Wo = out.shape[3]
    cdef Py_ssize_t b, to, ho, wo, it, ih, iw, c, oc, tid
    cdef Py_ssize_t row = Wo * OC
    cdef floating xv
    cdef floating *arow
    cdef floating *acc_row
    cdef floating *orow
    cdef const floating *wrow
    cdef const floating *xbase
    cdef int n_threads = openmp.omp_get_max_threads()

    dtype = np.float32 if floating is float else np.float64
    scratch_np = np.empty((n_threads, row), dtype=dtype)
    cdef floating[:, ::1] scratch = scratch_np

    with nogil, parallel():
        tid = threadid()
        for b in prange(B, schedule='static'):
            for to in range(To):
                for ho in range(Ho):
                    acc_row = &scratch[tid, 0]
                    for wo in range(row):
                        acc_row[wo] = 0
                    for it in range(kt):
                        for ih in range(kh):
                            xbase = &x[b, to * st + it, ho * sh + ih, 0, 0]
                            for iw in range(kw):
                                for c in range(C):
                                    wrow = &w[it, ih, iw, c, 0]
                                    for wo in range(Wo):
                                        xv = xbase[(wo * sw + iw) * C + c]
                                        arow = acc_row + wo * OC
                                        for oc in range(OC):
                                            arow[oc] = arow[oc] + xv * wrow[oc]
                    orow = &out[b, to, ho, 0, 0]
                    for wo in range(Wo):
                        for oc in range(OC):
                            orow[wo * OC + oc] = (acc_row[wo * OC + oc]
                                                  + bias[oc])


def conv3d_bwd_w(floating[:, :, :, :, ::1] x, floating[:, :, :, :, ::1] g,
                 int st, int sh, int sw, floating[:, :, :, :, ::1] gw,
                 floating[::1] gb):
    """Weight/bias gradients; per-thread accumulators avoid write races."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[4]
    cdef Py_ssize_t kt = gw.shape[0], kh = gw.shape[1], kw = gw.shape[2]
    cdef Py_ssize_t OC = gw.shape[4]
    cdef Py_ssize_t To = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    cdef Py_ssize_t K = kt * kh * kw * C
    cdef Py_ssize_t b, to, ho, wo, it, ih, iw, c, oc, tid, k
    cdef floating xv
    cdef floating *arow
    cdef floating *brow
    cdef const floating *grow
    cdef const floating *xbase
    cdef int n_threads = openmp.omp_get_max_threads()

    dtype = np.float32 if floating is float else np.float64
    acc_np = np.zeros((n_threads, K, OC), dtype=dtype)
    bacc_np = np.zeros((n_threads, OC), dtype=dtype)
    cdef floating[:, :, ::1] acc = acc_np
    cdef floating[:, ::1] bacc = bacc_np

    with nogil, parallel():
        tid = threadid()
        for b in prange(B, schedule='static'):
            for to in range(To):
                for ho in range(Ho):
                    grow = &g[b, to, ho, 0, 0]
                    brow = &bacc[tid, 0]
                    for wo in range(Wo):
                        for oc in range(OC):
                            brow[oc] += grow[wo * OC + oc]
                    k = 0
                    for it in range(kt):
                        for ih in range(kh):
                            xbase = &x[b, to * st + it, ho * sh + ih, 0, 0]
                            for iw in range(kw):
                                for c in range(C):
                                    arow = &acc[tid, k, 0]
                                    for wo in range(Wo):
                                        xv = xbase[(wo * sw + iw) * C + c]
                                        for oc in range(OC):
                                            arow[oc] += xv * grow[wo * OC + oc]
                                    k = k + 1

    np.asarray(gw)[...] = acc_np.sum(axis=0).reshape(kt, kh, kw, C, OC)
    np.asarray(gb)[...] = bacc_np.sum(axis=0)


def conv3d_bwd_x(floating[:, :, :, :, ::1] g, floating[:, :, :, :, ::1] w,
                 int st, int sh, int sw, floating[:, :, :, :, ::1] gx):
    """Input gradient; ``gx`` must be zero-initialized."""
    cdef Py_ssize_t B = gx.shape[0], C = gx.shape[4]
    cdef Py_ssize_t kt = w.shape[0], kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t OC = w.shape[4]
    cdef Py_ssize_t To = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    cdef Py_ssize_t b, to, ho, wo, it, ih, iw, c, oc
    cdef floating acc
    cdef floating *gxbase
    cdef const floating *grow
    cdef const floating *wrow

    for b in prange(B, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                grow = &g[b, to, ho, 0, 0]
                for it in range(kt):
                    for ih in range(kh):
                        gxbase = &gx[b, to * st + it, ho * sh + ih, 0, 0]
                        for iw in range(kw):
                            for c in range(C):
                                wrow = &w[it, ih, iw, c, 0]
                                for wo in range(Wo):
                                    acc = 0
                                    for oc in range(OC):
                                        acc = acc + (grow[wo * OC + oc]
                                                     * wrow[oc])
                                    gxbase[(wo * sw + iw) * C + c] += acc


def im2col(floating[:, :, :, :, ::1] x, int kt, int kh, int kw,
           int st, int sh, int sw, floating[:, ::1] out):
    """Fill ``out`` (B*To*Ho*Wo, kt*kh*kw*C) with flattened windows of x.

    A window's (kw, C) row span covers kw *consecutive* w positions (the
    stride only moves the window origin), so it is always contiguous in x
    and rows move as flat blocks."""
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], H = x.shape[2]
    cdef Py_ssize_t W = x.shape[3], C = x.shape[4]
    cdef Py_ssize_t To = (T - kt) // st + 1
    cdef Py_ssize_t Ho = (H - kh) // sh + 1
    cdef Py_ssize_t Wo = (W - kw) // sw + 1
    cdef Py_ssize_t b, to, ho, wo, it, ih, i, row, col
    cdef Py_ssize_t rows_per_b = To * Ho * Wo
    cdef Py_ssize_t span = kw * C
    cdef const floating *src
    cdef floating *dst

    for b in prange(B, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    row = b * rows_per_b + (to * Ho + ho) * Wo + wo
                    dst = &out[row, 0]
                    col = 0
                    for it in range(kt):
                        for ih in range(kh):
                            src = &x[b, to * st + it, ho * sh + ih,
                                     wo * sw, 0]
                            for i in range(span):
                                dst[col + i] = src[i]
                            col = col + span


def col2im(floating[:, ::1] cols, int kt, int kh, int kw,
           int st, int sh, int sw, floating[:, :, :, :, ::1] out):
    """Scatter-add ``cols`` rows back into the zero-initialized ``out``."""
    cdef Py_ssize_t B = out.shape[0], T = out.shape[1], H = out.shape[2]
    cdef Py_ssize_t W = out.shape[3], C = out.shape[4]
    cdef Py_ssize_t To = (T - kt) // st + 1
    cdef Py_ssize_t Ho = (H - kh) // sh + 1
    cdef Py_ssize_t Wo = (W - kw) // sw + 1
    cdef Py_ssize_t b, to, ho, wo, it, ih, i, row, col
    cdef Py_ssize_t rows_per_b = To * Ho * Wo
    cdef Py_ssize_t span = kw * C
    cdef const floating *src
    cdef floating *dst

    for b in prange(B, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    row = b * rows_per_b + (to * Ho + ho) * Wo + wo
                    src = &cols[row, 0]
                    col = 0
                    for it in range(kt):
                        for ih in range(kh):
                            dst = &out[b, to * st + it, ho * sh + ih,
                                       wo * sw, 0]
                            for i in range(span):
                                dst[i] += src[col + i]
                            col = col + span


def maxpool3d_fwd(floating[:, :, :, :, ::1] x, int pt, int ph, int pw,
                  floating[:, :, :, :, ::1] out,
                  unsigned char[:, :, :, :, ::1] idx):
    """Non-overlapping max pool; ``idx`` records the window-flat argmax
    (first maximum wins, so backward routing is deterministic)."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[4]
    cdef Py_ssize_t To = out.shape[1], Ho = out.shape[2], Wo = out.shape[3]
    cdef Py_ssize_t b, to, ho, wo, it, ih, iw, c, flat
    cdef floating v
    cdef floating *orow
    cdef unsigned char *irow
    cdef const floating *xrow

    for b in prange(B, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    orow = &out[b, to, ho, wo, 0]
                    irow = &idx[b, to, ho, wo, 0]
                    flat = 0
                    for it in range(pt):
                        for ih in range(ph):
                            for iw in range(pw):
                                xrow = &x[b, to * pt + it, ho * ph + ih,
                                          wo * pw + iw, 0]
                                if flat == 0:
                                    for c in range(C):
                                        orow[c] = xrow[c]
                                        irow[c] = 0
                                else:
                                    for c in range(C):
                                        v = xrow[c]
                                        if v > orow[c]:
                                            orow[c] = v
                                            irow[c] = <unsigned char> flat
                                flat = flat + 1


def maxpool3d_bwd(floating[:, :, :, :, ::1] g,
                  unsigned char[:, :, :, :, ::1] idx, int pt, int ph, int pw,
                  floating[:, :, :, :, ::1] gx):
    """Scatter pooled gradients back to the recorded argmax positions;
    ``gx`` must be zero-initialized."""
    cdef Py_ssize_t B = g.shape[0], C = g.shape[4]
    cdef Py_ssize_t To = g.shape[1], Ho = g.shape[2], Wo = g.shape[3]
    cdef Py_ssize_t b, to, ho, wo, c, flat, it, ih, iw

    for b in prange(B, nogil=True, schedule='static'):
        for to in range(To):
            for ho in range(Ho):
                for wo in range(Wo):
                    for c in range(C):
                        flat = idx[b, to, ho, wo, c]
                        it = flat // (ph * pw)
                        ih = (flat // pw) % ph
                        iw = flat % pw
                        gx[b, to * pt + it, ho * ph + ih, wo * pw + iw, c] = \
                            g[b, to, ho, wo, c]
