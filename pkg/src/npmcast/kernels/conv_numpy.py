"""Pure-numpy 2-D convolution kernels (forward and both gradients).

im2col formulation: the patch matrix is materialized once per call and the
contraction runs through BLAS matmul, which is where the speed comes from.
Used when numba is unavailable or NPM_BACKEND=numpy is set.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _out_extent(size, pad, dilation, kernel, stride):
    return (size + 2 * pad - dilation * (kernel - 1) - 1) // stride + 1


def _col_view(xp, groups, cg, kh_n, kw_n, oh, ow, sh, sw, dh, dw):
    """Zero-copy patch view [N, G, Cg, KH, KW, OH, OW] of the padded input."""
    n = xp.shape[0]
    sn, sc, sy, sx = xp.strides
    return as_strided(
        xp,
        shape=(n, groups, cg, kh_n, kw_n, oh, ow),
        strides=(sn, sc * cg, sc, sy * dh, sx * dw, sy * sh, sx * sw),
        writeable=False)


def conv2d_forward(x, w, sh, sw, ph, pw, dh, dw, groups):
    """Grouped 2-D cross-correlation. x: [N,C,H,W], w: [O,C/groups,KH,KW]."""
    n, c, h, width = x.shape
    o, cg, kh_n, kw_n = w.shape
    og = o // groups
    oh = _out_extent(h, ph, dh, kh_n, sh)
    ow = _out_extent(width, pw, dw, kw_n, sw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    view = _col_view(xp, groups, cg, kh_n, kw_n, oh, ow, sh, sw, dh, dw)
    cols = np.ascontiguousarray(view.transpose(1, 2, 3, 4, 0, 5, 6))
    cols = cols.reshape(groups, cg * kh_n * kw_n, n * oh * ow)
    wg = w.reshape(groups, og, cg * kh_n * kw_n)
    out = np.matmul(wg, cols).reshape(groups, og, n, oh, ow)
    return np.ascontiguousarray(out.transpose(2, 0, 1, 3, 4)).reshape(n, o, oh, ow)


def conv2d_grad_input(gout, w, x_shape, sh, sw, ph, pw, dh, dw, groups):
    """Gradient of conv2d_forward w.r.t. its input."""
    n, c, h, width = x_shape
    o, cg, kh_n, kw_n = w.shape
    og = o // groups
    oh, ow = gout.shape[2], gout.shape[3]
    gflat = np.ascontiguousarray(
        gout.reshape(n, groups, og, oh, ow).transpose(1, 2, 0, 3, 4)
    ).reshape(groups, og, n * oh * ow)
    wg = w.reshape(groups, og, cg * kh_n * kw_n)
    gcols = np.matmul(wg.transpose(0, 2, 1), gflat)
    gcols = gcols.reshape(groups, cg, kh_n, kw_n, n, oh, ow)
    gxp = np.zeros((n, groups, cg, h + 2 * ph, width + 2 * pw), dtype=gout.dtype)
    for kh in range(kh_n):
        for kw in range(kw_n):
            gxp[:, :, :,
                kh * dh: kh * dh + sh * (oh - 1) + 1: sh,
                kw * dw: kw * dw + sw * (ow - 1) + 1: sw] += \
                gcols[:, :, kh, kw].transpose(2, 0, 1, 3, 4)
    gxp = gxp.reshape(n, c, h + 2 * ph, width + 2 * pw)
    if ph or pw:
        return np.ascontiguousarray(gxp[:, :, ph: ph + h, pw: pw + width])
    return gxp


def conv2d_grad_weight(gout, x, w_shape, sh, sw, ph, pw, dh, dw, groups):
    """Gradient of conv2d_forward w.r.t. the weight."""
    n, c, h, width = x.shape
    o, cg, kh_n, kw_n = w_shape
    og = o // groups
    oh, ow = gout.shape[2], gout.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    view = _col_view(xp, groups, cg, kh_n, kw_n, oh, ow, sh, sw, dh, dw)
    cols = np.ascontiguousarray(view.transpose(1, 2, 3, 4, 0, 5, 6))
    cols = cols.reshape(groups, cg * kh_n * kw_n, n * oh * ow)
    gflat = np.ascontiguousarray(
        gout.reshape(n, groups, og, oh, ow).transpose(1, 2, 0, 3, 4)
    ).reshape(groups, og, n * oh * ow)
    gw = np.matmul(gflat, cols.transpose(0, 2, 1))
    return gw.reshape(o, cg, kh_n, kw_n)
