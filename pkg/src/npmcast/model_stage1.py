"""Stage-1 satellite forecaster: past T frames (plus terrain and a calendar
condition) to the next T_out frames.

Layout: each input frame runs through a shared strided encoder; a 1x1
projection lifts the per-frame latent to the translator width; the day/hour
condition enters once as a per-channel bias; a stack of spatio-temporal
attention blocks mixes the sequence; a 1x1 projection drops back to encoder
width; a time-mixing 1x1 convolution over the time-folded latent maps T
input slots to T_out output slots; a shared decoder renders each output
frame. Outputs are in network units (unbounded); clamping to [0, 1] happens
only where frames are fed back or exported.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor as tz
from .embedding import TimeEmbedding, TimeStamp, inject_condition
from .layers import Conv2d, Decoder, Encoder, ParamStore, StBlock, StBlockConfig
from .losses import stage1_loss
from .optim import AdamW, cosine_lr
from .tensor import ConfigError, DomainError, ShapeError, Tensor


class TrainingError(RuntimeError):
    """Raised when a training step produces a non-finite loss or gradient."""


@dataclass
class NpmConfig:
    t_in: int = 6
    t_out: int = 6
    sat_channels: int = 3
    use_dem: bool = True
    enc_dec_stages: int = 4
    st_blocks: int = 3
    enc_channels: int = 64
    st_channels: int = 512
    k_spatial_dw: int = 5
    k_spatial_dwd: int = 7
    spatial_dilation: int = 3
    k_temporal: int = 3
    mlp_ratio: float = 4.0
    use_embedding: bool = True
    d_pe: int = 32
    alpha: float = 0.1
    lr: float = 1e-4
    min_lr: float = 1e-6
    weight_decay: float = 0.01
    total_steps: int = 10000
    crop: int = 768

    def block_config(self):
        return StBlockConfig(self.st_channels, self.k_spatial_dw,
                             self.k_spatial_dwd, self.spatial_dilation,
                             self.k_temporal, self.mlp_ratio)

    def validate(self):
        if self.t_in < 1 or self.t_out < 1:
            raise ConfigError("t_in and t_out must be >= 1")
        if min(self.sat_channels, self.enc_channels, self.st_channels) < 1:
            raise ConfigError("channel widths must be >= 1")
        if self.enc_dec_stages < 0 or self.st_blocks < 0:
            raise ConfigError("stage and block counts must be >= 0")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.lr <= 0 or self.min_lr < 0 or self.total_steps < 1:
            raise ConfigError("lr must be > 0, min_lr >= 0, total_steps >= 1")
        div = 1 << self.enc_dec_stages
        if self.crop % div:
            raise ConfigError(
                f"crop {self.crop} not divisible by 2^stages = {div}")
        self.block_config().validate()

    def to_dict(self):
        return asdict(self)


class NpmModel:
    """Stage-1 network. Construction from (config, seed) is deterministic."""

    def __init__(self, config, seed=0, dtype=np.float32):
        config.validate()
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        store = ParamStore()
        self.store = store
        c_in = config.sat_channels + (1 if config.use_dem else 0)
        self.encoder = Encoder(store, "stage1.encoder", c_in,
                               config.enc_channels, config.enc_dec_stages,
                               rng, dtype=dtype)
        self.in_proj = Conv2d(store, "stage1.in_proj", config.enc_channels,
                              config.st_channels, 1, rng, dtype=dtype)
        self.embed = None
        if config.use_embedding:
            self.embed = TimeEmbedding(store, "stage1.embed",
                                       config.st_channels, rng,
                                       d_pe=config.d_pe, dtype=dtype)
        bc = config.block_config()
        self.blocks = [StBlock(store, f"stage1.block{i}", bc, rng, dtype=dtype)
                       for i in range(config.st_blocks)]
        self.out_proj = Conv2d(store, "stage1.out_proj", config.st_channels,
                               config.enc_channels, 1, rng, dtype=dtype)
        self.time_mix = Conv2d(store, "stage1.time_mix",
                               config.t_in * config.enc_channels,
                               config.t_out * config.enc_channels, 1, rng,
                               dtype=dtype)
        self.decoder = Decoder(store, "stage1.decoder", config.enc_channels,
                               config.sat_channels, config.enc_dec_stages,
                               rng, dtype=dtype)

    def _check_inputs(self, x, dem, timestamp):
        cfg = self.config
        t, c = cfg.t_in, cfg.sat_channels
        if len(x.shape) != 4 or x.shape[0] != t or x.shape[1] != c:
            raise ShapeError(
                f"expected input [{t}, {c}, H, W], got {x.shape}")
        if float(x.data.min()) < 0.0 or float(x.data.max()) > 1.0:
            raise DomainError(
                f"input frames must be normalized to [0, 1]; got range "
                f"[{x.data.min():.4g}, {x.data.max():.4g}]")
        if cfg.use_dem:
            if dem is None or dem.shape != (1, x.shape[2], x.shape[3]):
                raise ShapeError(
                    f"expected dem [1, {x.shape[2]}, {x.shape[3]}], got "
                    f"{None if dem is None else dem.shape}")
            if float(dem.data.min()) < 0.0 or float(dem.data.max()) > 1.0:
                raise DomainError("dem must be normalized to [0, 1]")
        if not isinstance(timestamp, TimeStamp):
            raise ConfigError(f"timestamp must be a TimeStamp, got {timestamp!r}")

    def forward(self, x, dem, timestamp):
        """Predict [t_out, sat_channels, H, W] from [t_in, sat_channels, H, W]."""
        cfg = self.config
        self._check_inputs(x, dem, timestamp)
        t, c, h, w = x.shape
        frames = x
        if cfg.use_dem:
            tiled = np.ascontiguousarray(
                np.broadcast_to(dem.data.astype(self.dtype), (t, 1, h, w)))
            frames = tz.concat([x, Tensor(tiled)], axis=1)
        z = self.encoder(frames)
        lat_h, lat_w = z.shape[2], z.shape[3]
        span = cfg.block_config().receptive_extent()
        if self.blocks and span > min(lat_h, lat_w):
            raise ConfigError(
                f"attention receptive extent {span} exceeds latent grid "
                f"{lat_h}x{lat_w}; shrink kernels or downsampling depth")
        z = self.in_proj(z)
        if self.embed is not None:
            z = inject_condition(z, self.embed(timestamp))
        z5 = tz.reshape(z, (1, t, cfg.st_channels, lat_h, lat_w))
        for blk in self.blocks:
            z5 = blk(z5)
        z = tz.reshape(z5, (t, cfg.st_channels, lat_h, lat_w))
        z = self.out_proj(z)
        zf = tz.reshape(z, (1, t * cfg.enc_channels, lat_h, lat_w))
        zf = self.time_mix(zf)
        z = tz.reshape(zf, (cfg.t_out, cfg.enc_channels, lat_h, lat_w))
        return self.decoder(z)


@dataclass(frozen=True)
class ForecastBatch:
    """One training window: inputs, targets, terrain, and the timestamp of
    the last input frame."""
    x: Tensor
    y: Tensor
    dem: Tensor
    timestamp: TimeStamp


def make_optimizer(model):
    cfg = model.config
    return AdamW(model.store, lr=cfg.lr, weight_decay=cfg.weight_decay)


def train_step(model, batch, opt):
    """One loss evaluation, backward pass, and optimizer update.

    Returns (LossReport, lr used). Raises TrainingError on the first
    non-finite loss or parameter gradient, naming the offender.
    """
    cfg = model.config
    tape = tz.Tape()
    with tape:
        model.store.watch_all(tape)
        pred = model.forward(batch.x, batch.dem, batch.timestamp)
        total, report = stage1_loss(pred, batch.y, cfg.alpha)
    if not np.isfinite(total.data):
        raise TrainingError(
            f"non-finite loss at step {opt.t}: mse={report.mse!r} "
            f"reg={report.reg!r}")
    grads = tz.backward(total)
    for name, p in model.store.items():
        g = grads.get(p)
        if g is not None and not np.all(np.isfinite(g.data)):
            raise TrainingError(
                f"non-finite gradient in parameter {name!r} at step {opt.t}")
    lr = cosine_lr(opt.t, cfg.total_steps, cfg.lr, cfg.min_lr)
    opt.step(grads, lr)
    return report, lr


def rollout(model, x, dem, timestamp, horizon, return_windows=False):
    """Autoregressive forecast of `horizon` frames.

    The first t_out frames come from one forward; afterwards the newest t_in
    frames (predictions clamped to [0, 1] to satisfy the input contract) are
    fed back and the timestamp advances t_out hours per window.
    """
    cfg = model.config
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {horizon!r}")
    preds = []
    windows = []
    with tz.no_tape():
        window = x.data
        ts = timestamp
        while len(preds) < horizon:
            wt = Tensor(np.ascontiguousarray(window))
            if return_windows:
                windows.append(np.array(window))
            out = model.forward(wt, dem, ts).data
            for i in range(cfg.t_out):
                preds.append(out[i])
            fed = np.clip(out, 0.0, 1.0)
            window = np.concatenate([window, fed], axis=0)[-cfg.t_in:]
            ts = ts.advanced(cfg.t_out)
    stacked = Tensor(np.ascontiguousarray(np.stack(preds[:horizon], axis=0)))
    if return_windows:
        return stacked, windows
    return stacked


def counterfactual_day(model, x, dem, timestamp, alt_timestamp):
    """Two forwards differing only in the calendar condition."""
    with tz.no_tape():
        base = model.forward(x, dem, timestamp)
        alt = model.forward(x, dem, alt_timestamp)
    return base, alt
