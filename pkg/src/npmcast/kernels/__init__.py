"""Convolution kernel backends.

Two implementations with identical signatures live in this package:

* ``conv_numba``: jitted direct loops, fastest for depthwise shapes where
  the per-group contraction is too small for BLAS to pay off.
* ``conv_numpy``: im2col plus BLAS matmul, fastest for dense convolutions.

``NPM_BACKEND`` selects the mode:

* unset or ``auto``: depthwise convolutions go to numba (when importable),
  everything else goes through BLAS.
* ``numba``: all convolutions through the jitted loops; raises if numba
  is missing.
* ``numpy``: all convolutions through the pure-numpy path.

``NPM_THREADS`` caps the numba thread pool. The kernels themselves are
serial either way, so results do not depend on the thread count.
"""

import os

from . import conv_numpy as _np_impl

_mode = os.environ.get("NPM_BACKEND", "").strip().lower()
if _mode in ("", "auto"):
    _mode = "auto"
elif _mode not in ("numba", "numpy"):
    raise ValueError(
        "NPM_BACKEND must be unset, 'auto', 'numba' or 'numpy', got %r" % _mode)

_nb_impl = None
if _mode in ("auto", "numba"):
    try:
        import numba as _numba
        from . import conv_numba as _nb_impl
    except ImportError:
        if _mode == "numba":
            raise
        _nb_impl = None
    else:
        _threads = os.environ.get("NPM_THREADS", "").strip()
        if _threads:
            _numba.set_num_threads(
                max(1, min(int(_threads), _numba.config.NUMBA_NUM_THREADS)))

if _mode == "numba":
    BACKEND = "numba"
elif _mode == "numpy" or _nb_impl is None:
    BACKEND = "numpy"
else:
    BACKEND = "auto"


def _pick(w_shape, groups):
    if BACKEND == "numpy":
        return _np_impl
    if BACKEND == "numba":
        return _nb_impl
    # auto: direct loops only where the per-group matmul degenerates
    if groups > 1 and w_shape[1] == 1:
        return _nb_impl
    return _np_impl


def conv2d_forward(x, w, sh, sw, ph, pw, dh, dw, groups):
    impl = _pick(w.shape, groups)
    return impl.conv2d_forward(x, w, sh, sw, ph, pw, dh, dw, groups)


def conv2d_grad_input(gout, w, x_shape, sh, sw, ph, pw, dh, dw, groups):
    impl = _pick(w.shape, groups)
    return impl.conv2d_grad_input(gout, w, x_shape, sh, sw, ph, pw, dh, dw, groups)


def conv2d_grad_weight(gout, x, w_shape, sh, sw, ph, pw, dh, dw, groups):
    impl = _pick(w_shape, groups)
    return impl.conv2d_grad_weight(gout, x, w_shape, sh, sw, ph, pw, dh, dw, groups)
