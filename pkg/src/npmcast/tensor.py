"""Dense float tensors with a reverse-mode gradient tape.

Every numeric operation in the package runs on these tensors. Values are
numpy arrays frozen at construction; recording happens only while a Tape is
active, so inference costs nothing extra. Gradients come back as a map from
watched leaves to arrays of the same shape.
"""

import math
from contextlib import contextmanager

import numpy as np
from scipy.special import erf as _erf

from . import kernels


class ShapeError(ValueError):
    """Operand shapes (or ranks) are incompatible for the requested op."""


class DomainError(ValueError):
    """Input values lie outside the mathematical domain of the op."""


class ConfigError(ValueError):
    """A configuration value makes the requested computation impossible."""


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_TAPE_STACK = []


class Node:
    """One recorded operation: inputs, and how to push a gradient through."""

    __slots__ = ("tape", "idx", "op", "inputs", "backward")

    def __init__(self, tape, idx, op, inputs, backward):
        self.tape = tape
        self.idx = idx
        self.op = op
        self.inputs = inputs  # tuple of Node-or-None, aligned with op inputs
        self.backward = backward  # None marks a watched leaf


class Tape:
    """Append-only record of operations; single-writer by contract."""

    def __init__(self):
        self.nodes = []

    def _append(self, op, input_nodes, backward):
        node = Node(self, len(self.nodes), op, input_nodes, backward)
        self.nodes.append(node)
        return node

    def watch(self, t):
        """Register a tensor as a differentiable leaf on this tape."""
        if t.node is None or t.node.tape is not self:
            t.node = self._append("leaf", (), None)

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


@contextmanager
def no_tape():
    """Temporarily disable recording (used by oracles and inference paths)."""
    _TAPE_STACK.append(None)
    try:
        yield
    finally:
        _TAPE_STACK.pop()


class Tensor:
    """Immutable dense array, optionally attached to a gradient tape."""

    __slots__ = ("data", "node")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data)
        if arr.dtype.kind not in "fiub":
            raise TypeError(f"unsupported dtype {arr.dtype}; use f32 or f64")
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.dtype not in (np.float32, np.float64):
            raise TypeError(f"unsupported dtype {arr.dtype}; use f32 or f64")
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.data = arr
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        """Same value, dropped from any tape."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name})"

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axes=None, keepdims=False):
        return reduce_sum(self, axes, keepdims)

    def mean(self, axes=None, keepdims=False):
        return reduce_mean(self, axes, keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)


def as_tensor(value, dtype=None):
    return value if isinstance(value, Tensor) else Tensor(value, dtype)


def zeros(shape, dtype=np.float32):
    return Tensor(np.zeros(shape, dtype=dtype))


def ones(shape, dtype=np.float32):
    return Tensor(np.ones(shape, dtype=dtype))


def zeros_like(t):
    return Tensor(np.zeros_like(t.data))


# -- recording machinery ---------------------------------------------


def _record(out_data, op, inputs, backward):
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None:
        in_nodes = tuple(
            t.node if (t.node is not None and t.node.tape is tape) else None
            for t in inputs)
        if any(n is not None for n in in_nodes):
            out.node = tape._append(op, in_nodes, backward)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _coerce_pair(a, b, op):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    else:
        a, b = as_tensor(a), as_tensor(b)
    if a.dtype != b.dtype:
        raise TypeError(f"{op}: dtype mismatch {a.dtype.name} vs {b.dtype.name}")
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")
    return a, b


class Grads:
    """Gradient map produced by backward(); keyed by watched tensors."""

    def __init__(self, tape, by_node):
        self._tape = tape
        self._by_node = by_node

    def get(self, t):
        if (t.node is not None and t.node.tape is self._tape
                and t.node.idx in self._by_node):
            return Tensor(self._by_node[t.node.idx])
        return None

    def __getitem__(self, t):
        g = self.get(t)
        if g is None:
            raise KeyError("tensor has no gradient on this tape (detached or unreachable)")
        return g

    def __contains__(self, t):
        return self.get(t) is not None


def backward(loss):
    """Reverse sweep from a scalar loss. Returns a Grads map over leaves.

    Tensors that were never watched (or detached) are silently excluded.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ShapeError(
            f"backward() needs a scalar loss, got shape {getattr(loss, 'shape', None)}")
    if loss.node is None:
        raise ValueError("loss is not attached to a gradient tape")
    tape = loss.node.tape
    grads = {loss.node.idx: np.ones_like(loss.data)}
    leaf_grads = {}
    for node in reversed(tape.nodes[: loss.node.idx + 1]):
        g = grads.pop(node.idx, None)
        if g is None:
            continue
        if node.backward is None:  # watched leaf
            leaf_grads[node.idx] = g
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if inp is None or gi is None:
                continue
            if inp.idx in grads:
                grads[inp.idx] = grads[inp.idx] + gi
            else:
                grads[inp.idx] = gi
    return Grads(tape, leaf_grads)


# -- elementwise binary ops ------------------------------------------


def add(a, b):
    a, b = _coerce_pair(a, b, "add")
    def bwd(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return _record(a.data + b.data, "add", (a, b), bwd)


def sub(a, b):
    a, b = _coerce_pair(a, b, "sub")
    def bwd(g):
        return (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    return _record(a.data - b.data, "sub", (a, b), bwd)


def mul(a, b):
    a, b = _coerce_pair(a, b, "mul")
    ad, bd = a.data, b.data
    def bwd(g):
        return (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape))
    return _record(ad * bd, "mul", (a, b), bwd)


def div(a, b):
    a, b = _coerce_pair(a, b, "div")
    if np.any(b.data == 0):
        raise DomainError("div: divisor contains zero")
    ad, bd = a.data, b.data
    def bwd(g):
        return (_unbroadcast(g / bd, a.shape),
                _unbroadcast(-g * ad / (bd * bd), b.shape))
    return _record(ad / bd, "div", (a, b), bwd)


# -- elementwise unary ops -------------------------------------------


def neg(a):
    a = as_tensor(a)
    return _record(-a.data, "neg", (a,), lambda g: (-g,))


def exp(a):
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    if not np.all(np.isfinite(out)):
        raise DomainError("exp: overflow to non-finite values")
    return _record(out, "exp", (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log: input must be strictly positive")
    ad = a.data
    return _record(np.log(ad), "log", (a,), lambda g: (g / ad,))


def sqrt(a):
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt: input must be nonnegative")
    out = np.sqrt(a.data)
    def bwd(g):
        return (g * (0.5 / np.maximum(out, np.finfo(out.dtype).tiny)),)
    return _record(out, "sqrt", (a,), bwd)


def gelu(a):
    """Exact erf-based GELU: x/2 * (1 + erf(x/sqrt(2)))."""
    a = as_tensor(a)
    ad = a.data
    cdf = 0.5 * (1.0 + _erf(ad / np.asarray(_SQRT2, dtype=ad.dtype)))
    def bwd(g):
        pdf = np.asarray(_INV_SQRT_2PI, dtype=ad.dtype) * np.exp(-0.5 * ad * ad)
        return (g * (cdf + ad * pdf).astype(ad.dtype, copy=False),)
    return _record(ad * cdf, "gelu", (a,), bwd)


def sigmoid(a):
    a = as_tensor(a)
    ad = a.data
    out = np.empty_like(ad)
    pos = ad >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-ad[pos]))
    ex = np.exp(ad[~pos])
    out[~pos] = ex / (1.0 + ex)
    def bwd(g):
        return (g * out * (1.0 - out),)
    return _record(out, "sigmoid", (a,), bwd)


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    ad = a.data
    s = np.asarray(slope, dtype=ad.dtype)
    def bwd(g):
        return (g * np.where(ad >= 0, ad.dtype.type(1.0), s),)
    return _record(np.where(ad >= 0, ad, s * ad), "leaky_relu", (a,), bwd)


def clamp_min(a, floor):
    """Elementwise max(a, floor); gradient passes only where a > floor."""
    a = as_tensor(a)
    ad = a.data
    f = np.asarray(floor, dtype=ad.dtype)
    def bwd(g):
        return (g * (ad > f).astype(ad.dtype),)
    return _record(np.maximum(ad, f), "clamp_min", (a,), bwd)


# -- matmul and conv -------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")
    if a.dtype != b.dtype:
        raise TypeError(f"matmul: dtype mismatch {a.dtype.name} vs {b.dtype.name}")
    ad, bd = a.data, b.data
    def bwd(g):
        return (g @ bd.T, ad.T @ g)
    return _record(ad @ bd, "matmul", (a, b), bwd)


def _pair(v):
    return (v, v) if isinstance(v, int) else (int(v[0]), int(v[1]))


def conv2d(x, w, bias=None, stride=1, padding=0, dilation=1, groups=1):
    """Grouped 2-D cross-correlation over NCHW tensors.

    w has shape [O, C/groups, KH, KW]. Output extents follow the usual
    floor((H + 2p - d*(k-1) - 1)/s) + 1 arithmetic and must be >= 1.
    """
    x, w = as_tensor(x), as_tensor(w)
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    dh, dw = _pair(dilation)
    if min(sh, sw, dh, dw, groups) < 1 or min(ph, pw) < 0:
        raise ConfigError(
            f"conv2d: stride/dilation/groups must be >= 1 and padding >= 0, "
            f"got stride ({sh},{sw}), padding ({ph},{pw}), dilation "
            f"({dh},{dw}), groups {groups}")
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: expects 4-D x and w, got {x.shape} and {w.shape}")
    n, c, h, wid = x.shape
    o, cg, kh, kw = w.shape
    if c % groups or o % groups:
        raise ShapeError(f"conv2d: channels {c} and filters {o} must divide groups={groups}")
    if cg != c // groups:
        raise ShapeError(f"conv2d: weight expects {cg * groups} input channels, x has {c}")
    if x.dtype != w.dtype:
        raise TypeError(f"conv2d: dtype mismatch {x.dtype.name} vs {w.dtype.name}")
    oh = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    ow = (wid + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if oh < 1 or ow < 1:
        raise ConfigError(
            f"conv2d: computed output extent {oh}x{ow} < 1 for input {h}x{wid}, "
            f"kernel {kh}x{kw}, stride ({sh},{sw}), padding ({ph},{pw}), dilation ({dh},{dw})")
    out = kernels.conv2d_forward(x.data, w.data, sh, sw, ph, pw, dh, dw, groups)
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({o},)")
        out = out + bias.data.reshape(1, o, 1, 1)
        inputs = (x, w, bias)
    xd, wd = x.data, w.data
    x_shape = (int(n), int(c), int(h), int(wid))
    def bwd(g):
        g = np.ascontiguousarray(g)
        gx = kernels.conv2d_grad_input(g, wd, x_shape, sh, sw, ph, pw, dh, dw, groups)
        gw = kernels.conv2d_grad_weight(g, xd, wd.shape, sh, sw, ph, pw, dh, dw, groups)
        if len(inputs) == 3:
            return (gx, gw, g.sum(axis=(0, 2, 3)))
        return (gx, gw)
    return _record(out, "conv2d", inputs, bwd)


# -- reductions and softmax ------------------------------------------


def _norm_axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def reduce_sum(x, axes=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axes, x.data.ndim)
    shape_kept = tuple(1 if i in axes else s for i, s in enumerate(x.shape))
    def bwd(g):
        return (np.broadcast_to(g.reshape(shape_kept), x.shape).astype(x.dtype, copy=False),)
    return _record(x.data.sum(axis=axes, keepdims=keepdims), "sum", (x,), bwd)


def reduce_mean(x, axes=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axes, x.data.ndim)
    count = 1
    for a in axes:
        count *= x.shape[a]
    if count == 0:
        raise ShapeError("mean: empty reduction axis")
    shape_kept = tuple(1 if i in axes else s for i, s in enumerate(x.shape))
    inv = 1.0 / count
    def bwd(g):
        gb = np.broadcast_to(g.reshape(shape_kept), x.shape)
        return ((gb * np.asarray(inv, dtype=x.dtype)).astype(x.dtype, copy=False),)
    return _record(x.data.mean(axis=axes, keepdims=keepdims), "mean", (x,), bwd)


def reduce_max(x, axes=None, keepdims=False):
    x = as_tensor(x)
    axes = _norm_axes(axes, x.data.ndim)
    for a in axes:
        if x.shape[a] == 0:
            raise ShapeError("max: empty reduction axis")
    out = x.data.max(axis=axes, keepdims=keepdims)
    shape_kept = tuple(1 if i in axes else s for i, s in enumerate(x.shape))
    xd = x.data
    def bwd(g):
        full = np.broadcast_to(out.reshape(shape_kept), xd.shape)
        mask = (xd == full)
        ties = mask.sum(axis=axes, keepdims=True)
        gb = np.broadcast_to(g.reshape(shape_kept), xd.shape)
        return ((gb * mask / ties).astype(xd.dtype, copy=False),)
    return _record(out, "max", (x,), bwd)


def softmax(x, axis=-1):
    """Numerically stabilized softmax (max-subtraction is mandatory)."""
    x = as_tensor(x)
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    def bwd(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)
    return _record(out, "softmax", (x,), bwd)


# -- shape ops --------------------------------------------------------


def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}")
    def bwd(g):
        return (g.reshape(old),)
    return _record(out, "reshape", (x,), bwd)


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    def bwd(g):
        return (np.ascontiguousarray(g.transpose(inv)),)
    return _record(np.ascontiguousarray(x.data.transpose(axes)), "transpose", (x,), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty tensor list")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))
    return _record(np.concatenate([t.data for t in tensors], axis=axis),
                   "concat", tuple(tensors), bwd)


def narrow(x, axis, start, length):
    """Contiguous slice along one axis."""
    x = as_tensor(x)
    ndim = x.data.ndim
    axis = axis % ndim
    if start < 0 or start + length > x.shape[axis]:
        raise ShapeError(
            f"narrow: window [{start}, {start + length}) outside extent {x.shape[axis]}")
    idx = tuple(slice(start, start + length) if i == axis else slice(None)
                for i in range(ndim))
    xshape = x.shape
    def bwd(g):
        gx = np.zeros(xshape, dtype=g.dtype)
        gx[idx] = g
        return (gx,)
    return _record(np.ascontiguousarray(x.data[idx]), "narrow", (x,), bwd)


def upsample_nearest2x(x):
    """Nearest-neighbour 2x upsampling of an NCHW tensor."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"upsample_nearest2x: expects 4-D input, got {x.shape}")
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    def bwd(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)
    return _record(out, "upsample_nearest2x", (x,), bwd)


# -- finite differences ----------------------------------------------


def finite_diff_grad(f, x, step=1e-5):
    """Central-difference gradient of a scalar-valued f at x (f64 only).

    This is the independent oracle the analytic backward pass is checked
    against; it never touches the tape.
    """
    x = as_tensor(x)
    if x.dtype != np.float64:
        raise TypeError("finite_diff_grad: x must be f64 for a trustworthy oracle")
    flat = x.data.reshape(-1)
    grad = np.zeros_like(flat)
    with no_tape():
        for i in range(flat.size):
            up = flat.copy()
            dn = flat.copy()
            up[i] += step
            dn[i] -= step
            fu = f(Tensor(up.reshape(x.shape)))
            fd = f(Tensor(dn.reshape(x.shape)))
            grad[i] = (float(fu.data) - float(fd.data)) / (2.0 * step)
    return Tensor(grad.reshape(x.shape))
