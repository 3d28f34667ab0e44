"""Numba-jitted 2-D convolution kernels (forward and both gradients).

Direct-loop formulation with the innermost loop running along the output
width so the compiler can vectorize it. Loops are serial and execute in a
fixed order, so results are bitwise deterministic run to run.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _w_bounds(base, sw, width, ow):
    """Output-column range [lo, hi) whose input column base+xi*sw is valid."""
    if base >= 0:
        lo = 0
    else:
        lo = (-base + sw - 1) // sw
    hi = (width - 1 - base) // sw + 1
    if hi > ow:
        hi = ow
    return lo, hi


@njit(cache=True)
def conv2d_forward(x, w, sh, sw, ph, pw, dh, dw, groups):
    """Grouped 2-D cross-correlation. x: [N,C,H,W], w: [O,C/groups,KH,KW]."""
    n, c, h, width = x.shape
    o, cg, kh_n, kw_n = w.shape
    og = o // groups
    oh = (h + 2 * ph - dh * (kh_n - 1) - 1) // sh + 1
    ow = (width + 2 * pw - dw * (kw_n - 1) - 1) // sw + 1
    out = np.zeros((n, o, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for oi in range(o):
            g = oi // og
            for yi in range(oh):
                ih0 = yi * sh - ph
                orow = out[ni, oi, yi]
                for ci in range(cg):
                    xplane = x[ni, g * cg + ci]
                    for kh in range(kh_n):
                        ih = ih0 + kh * dh
                        if ih < 0 or ih >= h:
                            continue
                        xrow = xplane[ih]
                        for kw in range(kw_n):
                            wv = w[oi, ci, kh, kw]
                            base = kw * dw - pw
                            lo, hi = _w_bounds(base, sw, width, ow)
                            for xi in range(lo, hi):
                                orow[xi] += wv * xrow[base + xi * sw]
    return out


@njit(cache=True)
def conv2d_grad_input(gout, w, x_shape, sh, sw, ph, pw, dh, dw, groups):
    """Gradient of conv2d_forward w.r.t. its input."""
    n, c, h, width = x_shape
    o, cg, kh_n, kw_n = w.shape
    og = o // groups
    oh, ow = gout.shape[2], gout.shape[3]
    gx = np.zeros((n, c, h, width), dtype=gout.dtype)
    for ni in range(n):
        for oi in range(o):
            g = oi // og
            for yi in range(oh):
                ih0 = yi * sh - ph
                grow = gout[ni, oi, yi]
                for ci in range(cg):
                    gplane = gx[ni, g * cg + ci]
                    for kh in range(kh_n):
                        ih = ih0 + kh * dh
                        if ih < 0 or ih >= h:
                            continue
                        gxrow = gplane[ih]
                        for kw in range(kw_n):
                            wv = w[oi, ci, kh, kw]
                            base = kw * dw - pw
                            lo, hi = _w_bounds(base, sw, width, ow)
                            for xi in range(lo, hi):
                                gxrow[base + xi * sw] += wv * grow[xi]
    return gx


@njit(cache=True)
def conv2d_grad_weight(gout, x, w_shape, sh, sw, ph, pw, dh, dw, groups):
    """Gradient of conv2d_forward w.r.t. the weight."""
    n, c, h, width = x.shape
    o, cg, kh_n, kw_n = w_shape
    og = o // groups
    oh, ow = gout.shape[2], gout.shape[3]
    gw = np.zeros((o, cg, kh_n, kw_n), dtype=gout.dtype)
    for ni in range(n):
        for oi in range(o):
            g = oi // og
            for yi in range(oh):
                ih0 = yi * sh - ph
                grow = gout[ni, oi, yi]
                for ci in range(cg):
                    xplane = x[ni, g * cg + ci]
                    for kh in range(kh_n):
                        ih = ih0 + kh * dh
                        if ih < 0 or ih >= h:
                            continue
                        xrow = xplane[ih]
                        for kw in range(kw_n):
                            base = kw * dw - pw
                            lo, hi = _w_bounds(base, sw, width, ow)
                            acc = 0.0
                            for xi in range(lo, hi):
                                acc += grow[xi] * xrow[base + xi * sw]
                            gw[oi, ci, kh, kw] += acc
    return gw
