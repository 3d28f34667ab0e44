"""Neural building blocks on top of the tensor module.

Linear and convolution wrappers, group normalization, the large-kernel
spatial attention (LKA), its temporal counterpart (TKA), the composed
ST-Block, and the frame encoder/decoder pair.

Parameters live in a ParamStore keyed by hierarchical path strings, so the
whole model serializes through the checkpoint format and the optimizer can
swap tensors in place of a layer-local attribute. Layers look their
parameters up by name at call time and are otherwise stateless.
"""

import numpy as np

from . import tensor as tz
from .tensor import ConfigError, ShapeError, Tensor


class ParamStore:
    """Named parameter registry. Paths are unique; shapes fixed after add."""

    def __init__(self):
        self._params = {}

    def add(self, name, data):
        if name in self._params:
            raise ConfigError(f"duplicate parameter path {name!r}")
        t = data if isinstance(data, Tensor) else Tensor(data)
        self._params[name] = t
        return t

    def replace(self, name, t):
        old = self._params[name]
        if t.shape != old.shape or t.dtype != old.dtype:
            raise ShapeError(
                f"replace {name!r}: shape/dtype {t.shape}/{t.dtype} does not "
                f"match registered {old.shape}/{old.dtype}")
        self._params[name] = t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return sorted(self._params)

    def items(self):
        return [(k, self._params[k]) for k in self.names()]

    @property
    def n_params(self):
        return sum(t.size for t in self._params.values())

    def watch_all(self, tape):
        for name in self.names():
            tape.watch(self._params[name])

    def to_arrays(self):
        return {k: v.data for k, v in self.items()}

    def load_arrays(self, arrays):
        """Replace every parameter from a name->ndarray map (strict)."""
        missing = sorted(set(self._params) - set(arrays))
        extra = sorted(set(arrays) - set(self._params))
        if missing or extra:
            raise ConfigError(
                f"parameter set mismatch: missing {missing[:4]}, extra {extra[:4]}")
        for name, arr in arrays.items():
            old = self._params[name]
            arr = np.asarray(arr, dtype=old.dtype)
            if arr.shape != old.shape:
                raise ShapeError(
                    f"load {name!r}: shape {arr.shape} != registered {old.shape}")
            self._params[name] = Tensor(arr)


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear:
    """Affine map on [N, d_in]. Fan-in uniform weights, zero bias."""

    def __init__(self, store, prefix, d_in, d_out, rng, dtype=np.float32):
        self.store = store
        self.w_name = prefix + ".weight"
        self.b_name = prefix + ".bias"
        store.add(self.w_name, _uniform(rng, (d_in, d_out), d_in, dtype))
        store.add(self.b_name, np.zeros(d_out, dtype=dtype))

    def __call__(self, x):
        return tz.matmul(x, self.store[self.w_name]) + self.store[self.b_name]


class Conv2d:
    """2-D convolution wrapper holding geometry and parameter names."""

    def __init__(self, store, prefix, c_in, c_out, kernel, rng, stride=1,
                 padding=0, dilation=1, groups=1, bias=True, dtype=np.float32):
        if c_in % groups or c_out % groups:
            raise ConfigError(
                f"conv {prefix!r}: channels ({c_in}->{c_out}) not divisible "
                f"by groups={groups}")
        kh, kw = kernel if isinstance(kernel, tuple) else (kernel, kernel)
        self.store = store
        self.stride, self.padding, self.dilation = stride, padding, dilation
        self.groups = groups
        self.w_name = prefix + ".weight"
        self.b_name = prefix + ".bias" if bias else None
        fan_in = (c_in // groups) * kh * kw
        store.add(self.w_name,
                  _uniform(rng, (c_out, c_in // groups, kh, kw), fan_in, dtype))
        if bias:
            store.add(self.b_name, np.zeros(c_out, dtype=dtype))

    def __call__(self, x):
        b = self.store[self.b_name] if self.b_name else None
        return tz.conv2d(x, self.store[self.w_name], bias=b, stride=self.stride,
                         padding=self.padding, dilation=self.dilation,
                         groups=self.groups)


class GroupNorm:
    """Per-group channel normalization over [N, C, H, W].

    The group count is clamped to the largest divisor of C not exceeding
    the request, so any channel width is accepted.
    """

    def __init__(self, store, prefix, channels, rng=None, groups=8,
                 eps=1e-5, dtype=np.float32):
        g = min(groups, channels)
        while channels % g:
            g -= 1
        self.groups = g
        self.channels = channels
        self.eps = eps
        self.store = store
        self.w_name = prefix + ".scale"
        self.b_name = prefix + ".shift"
        store.add(self.w_name, np.ones(channels, dtype=dtype))
        store.add(self.b_name, np.zeros(channels, dtype=dtype))

    def __call__(self, x):
        n, c, h, w = x.shape
        if c != self.channels:
            raise ShapeError(
                f"group norm expects {self.channels} channels, got {c}")
        xg = tz.reshape(x, (n, self.groups, (c // self.groups) * h * w))
        mu = tz.reduce_mean(xg, axes=2, keepdims=True)
        d = xg - mu
        var = tz.reduce_mean(d * d, axes=2, keepdims=True)
        norm = d / tz.sqrt(var + self.eps)
        norm = tz.reshape(norm, (n, c, h, w))
        scale = tz.reshape(self.store[self.w_name], (1, c, 1, 1))
        shift = tz.reshape(self.store[self.b_name], (1, c, 1, 1))
        return norm * scale + shift


class LargeKernelAttention:
    """Spatial attention: pointwise(dilated-depthwise(depthwise(x))) ⊙ x."""

    def __init__(self, store, prefix, channels, rng, k_dw=5, k_dwd=7,
                 dilation=3, dtype=np.float32):
        if k_dw % 2 == 0 or k_dwd % 2 == 0:
            raise ConfigError("attention kernel sizes must be odd")
        self.dw = Conv2d(store, prefix + ".dw", channels, channels, k_dw, rng,
                         padding=k_dw // 2, groups=channels, dtype=dtype)
        self.dwd = Conv2d(store, prefix + ".dwd", channels, channels, k_dwd,
                          rng, padding=dilation * (k_dwd // 2),
                          dilation=dilation, groups=channels, dtype=dtype)
        self.pw = Conv2d(store, prefix + ".pw", channels, channels, 1, rng,
                         dtype=dtype)

    def __call__(self, x):
        attn = self.pw(self.dwd(self.dw(x)))
        return attn * x


class TemporalKernelAttention:
    """Temporal attention: depthwise 1-D conv along time gates x elementwise.

    Input layout is [N, T, C, H, W]; the conv runs over T per channel with
    padding kt // 2, so T is preserved for odd kernel sizes.
    """

    def __init__(self, store, prefix, channels, rng, k_t=3, dtype=np.float32):
        if k_t % 2 == 0:
            raise ConfigError("temporal kernel size must be odd")
        self.k_t = k_t
        self.conv = Conv2d(store, prefix + ".dwt", channels, channels,
                           (k_t, 1), rng, padding=(k_t // 2, 0),
                           groups=channels, dtype=dtype)

    def __call__(self, x):
        n, t, c, h, w = x.shape
        if t + 2 * (self.k_t // 2) < self.k_t:
            raise ConfigError(
                f"temporal extent {t} shorter than kernel span {self.k_t}")
        xr = tz.reshape(x, (n, t, c, h * w))
        xt = tz.transpose(xr, (0, 2, 1, 3))
        gate = self.conv(xt)
        gate = tz.transpose(gate, (0, 2, 1, 3))
        gate = tz.reshape(gate, (n, t, c, h, w))
        return gate * x


class PointwiseMlp:
    """Per-position feed-forward: 1x1 expand, GELU, 1x1 project."""

    def __init__(self, store, prefix, channels, rng, ratio=4, dtype=np.float32):
        hidden = max(1, int(round(channels * ratio)))
        self.fc1 = Conv2d(store, prefix + ".fc1", channels, hidden, 1, rng,
                          dtype=dtype)
        self.fc2 = Conv2d(store, prefix + ".fc2", hidden, channels, 1, rng,
                          dtype=dtype)

    def __call__(self, x):
        return self.fc2(tz.gelu(self.fc1(x)))


class StBlockConfig:
    """Geometry of one spatio-temporal block."""

    def __init__(self, channels, k_spatial_dw=5, k_spatial_dwd=7,
                 spatial_dilation=3, k_temporal=3, mlp_ratio=4):
        self.channels = channels
        self.k_spatial_dw = k_spatial_dw
        self.k_spatial_dwd = k_spatial_dwd
        self.spatial_dilation = spatial_dilation
        self.k_temporal = k_temporal
        self.mlp_ratio = mlp_ratio

    def receptive_extent(self):
        """Spatial span of the stacked attention convolutions."""
        span_dw = self.k_spatial_dw
        span_dwd = self.spatial_dilation * (self.k_spatial_dwd - 1) + 1
        return span_dw + span_dwd - 1

    def validate(self, latent_extent=None):
        for k in (self.k_spatial_dw, self.k_spatial_dwd, self.k_temporal):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel sizes must be odd and >= 1, got {k}")
        if self.channels < 1 or self.mlp_ratio <= 0:
            raise ConfigError("channels must be >= 1 and mlp_ratio positive")
        if latent_extent is not None and self.receptive_extent() > latent_extent:
            raise ConfigError(
                f"attention receptive extent {self.receptive_extent()} exceeds "
                f"latent grid extent {latent_extent}")


class StBlock:
    """Pre-normalized temporal attention, spatial attention, and MLP, each
    with its own residual connection. Input and output are [N, T, C, H, W]."""

    def __init__(self, store, prefix, config, rng, dtype=np.float32):
        config.validate()
        c = config.channels
        self.norm_t = GroupNorm(store, prefix + ".norm_t", c, dtype=dtype)
        self.tka = TemporalKernelAttention(store, prefix + ".tka", c, rng,
                                           k_t=config.k_temporal, dtype=dtype)
        self.norm_s = GroupNorm(store, prefix + ".norm_s", c, dtype=dtype)
        self.lka = LargeKernelAttention(store, prefix + ".lka", c, rng,
                                        k_dw=config.k_spatial_dw,
                                        k_dwd=config.k_spatial_dwd,
                                        dilation=config.spatial_dilation,
                                        dtype=dtype)
        self.norm_m = GroupNorm(store, prefix + ".norm_m", c, dtype=dtype)
        self.mlp = PointwiseMlp(store, prefix + ".mlp", c, rng,
                                ratio=config.mlp_ratio, dtype=dtype)

    def _norm5(self, norm, x):
        n, t, c, h, w = x.shape
        flat = tz.reshape(x, (n * t, c, h, w))
        return tz.reshape(norm(flat), (n, t, c, h, w))

    def _fold(self, fn, x):
        n, t, c, h, w = x.shape
        flat = tz.reshape(x, (n * t, c, h, w))
        return tz.reshape(fn(flat), (n, t, c, h, w))

    def __call__(self, x):
        x = x + self.tka(self._norm5(self.norm_t, x))
        x = x + self._fold(self.lka, self._norm5(self.norm_s, x))
        x = x + self._fold(self.mlp, self._norm5(self.norm_m, x))
        return x


class Encoder:
    """Stem convolution plus stride-2 stages; each stage halves H and W."""

    def __init__(self, store, prefix, c_in, width, stages, rng,
                 dtype=np.float32):
        self.stages = stages
        self.stem = Conv2d(store, prefix + ".stem", c_in, width, 3, rng,
                           padding=1, dtype=dtype)
        self.downs = [
            Conv2d(store, f"{prefix}.down{i}", width, width, 3, rng,
                   stride=2, padding=1, dtype=dtype)
            for i in range(stages)]

    def __call__(self, x):
        n, c, h, w = x.shape
        div = 1 << self.stages
        if h % div or w % div:
            raise ConfigError(
                f"encoder with {self.stages} stages needs H, W divisible by "
                f"{div}, got {h}x{w}")
        z = tz.gelu(self.stem(x))
        for conv in self.downs:
            z = tz.gelu(conv(z))
        return z


class Decoder:
    """Mirror of the encoder: nearest-neighbor upsampling plus convolution
    per stage, then a linear head back to the output channel count."""

    def __init__(self, store, prefix, width, c_out, stages, rng,
                 dtype=np.float32):
        self.ups = [
            Conv2d(store, f"{prefix}.up{i}", width, width, 3, rng,
                   padding=1, dtype=dtype)
            for i in range(stages)]
        self.head = Conv2d(store, prefix + ".head", width, c_out, 3, rng,
                           padding=1, dtype=dtype)

    def __call__(self, z):
        for conv in self.ups:
            z = tz.gelu(conv(tz.upsample_nearest2x(z)))
        return self.head(z)
