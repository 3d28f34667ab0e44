"""Stage-2 satellite-to-radar translation: a skip-connected convolutional
generator and a conditional patch discriminator.

The generator maps a satellite frame (optionally with terrain) to a
normalized rain-rate field squashed to [0, 1] by a sigmoid; physical rates
are recovered by scaling with rate_max and clamping. The discriminator
scores (radar, satellite) pairs patchwise after a stack of strided
convolutions. Training follows MSE plus lambda * mean(log(1 - D(fake))) for
the generator and binary cross-entropy for the discriminator.
"""

from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as tz
from .layers import Conv2d, ParamStore
from .losses import discriminator_loss, generator_loss
from .optim import AdamW, cosine_lr
from .tensor import ConfigError, ShapeError, Tensor

from .model_stage1 import TrainingError


@dataclass
class S2rConfig:
    in_channels: int = 3
    use_dem: bool = True
    base_width: int = 32
    depth: int = 2
    disc_width: int = 32
    disc_depth: int = 3
    lam: float = 0.01
    rate_max: float = 100.0
    lr: float = 1e-4
    min_lr: float = 1e-6
    weight_decay: float = 0.01
    total_steps: int = 10000

    def validate(self):
        if self.in_channels < 1 or self.base_width < 1 or self.disc_width < 1:
            raise ConfigError("channel widths must be >= 1")
        if self.depth < 0 or self.disc_depth < 1:
            raise ConfigError("depth must be >= 0 and disc_depth >= 1")
        if self.lam < 0 or self.rate_max <= 0:
            raise ConfigError("lambda must be >= 0 and rate_max > 0")
        if self.lr <= 0 or self.min_lr < 0 or self.total_steps < 1:
            raise ConfigError("lr must be > 0, min_lr >= 0, total_steps >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RadarFramePred:
    """One translated frame in mm/h, clamped to [0, rate_max]."""
    values: Tensor
    lead_hours: int = 0


class S2rGenerator:
    """Encoder-decoder translator with additive skip connections."""

    def __init__(self, config, seed=0, dtype=np.float32):
        config.validate()
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        store = ParamStore()
        self.store = store
        w = config.base_width
        c_in = config.in_channels + (1 if config.use_dem else 0)
        self.stem = Conv2d(store, "gen.stem", c_in, w, 3, rng, padding=1,
                           dtype=dtype)
        self.downs = [Conv2d(store, f"gen.down{i}", w, w, 3, rng, stride=2,
                             padding=1, dtype=dtype)
                      for i in range(config.depth)]
        self.mid = Conv2d(store, "gen.mid", w, w, 3, rng, padding=1,
                          dtype=dtype)
        self.ups = [Conv2d(store, f"gen.up{i}", w, w, 3, rng, padding=1,
                           dtype=dtype)
                    for i in range(config.depth)]
        self.head = Conv2d(store, "gen.head", w, 1, 3, rng, padding=1,
                           dtype=dtype)
        # rain targets are mostly exactly zero; starting the sigmoid head
        # at a small base rate keeps its gradient alive instead of letting
        # the dry majority saturate it toward zero output
        store.replace("gen.head.bias", Tensor(np.full(1, -4.0, dtype=dtype)))

    def forward(self, x):
        """Batched translation [N, C(+dem), H, W] -> [N, 1, H, W] in [0, 1]."""
        n, c, h, w = x.shape
        div = 1 << self.config.depth
        if h % div or w % div:
            raise ConfigError(
                f"generator with depth {self.config.depth} needs H, W "
                f"divisible by {div}, got {h}x{w}")
        z = tz.gelu(self.stem(x))
        skips = []
        for conv in self.downs:
            skips.append(z)
            z = tz.gelu(conv(z))
        z = tz.gelu(self.mid(z))
        for conv, skip in zip(self.ups, reversed(skips)):
            z = tz.gelu(conv(tz.upsample_nearest2x(z))) + skip
        return tz.sigmoid(self.head(z))


class S2rDiscriminator:
    """Patchwise conditional discriminator over (radar, satellite) pairs."""

    def __init__(self, config, seed=0, dtype=np.float32):
        config.validate()
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed + 1)
        store = ParamStore()
        self.store = store
        w = config.disc_width
        c_in = 1 + config.in_channels + (1 if config.use_dem else 0)
        self.stem = Conv2d(store, "disc.stem", c_in, w, 3, rng, padding=1,
                           dtype=dtype)
        self.downs = [Conv2d(store, f"disc.down{i}", w, w, 3, rng, stride=2,
                             padding=1, dtype=dtype)
                      for i in range(config.disc_depth)]
        self.head = Conv2d(store, "disc.head", w, 1, 3, rng, padding=1,
                           dtype=dtype)

    def forward(self, radar, sat):
        """Score map in (0, 1); spatial extent shrinks by 2^disc_depth."""
        if radar.shape[0] != sat.shape[0] or radar.shape[2:] != sat.shape[2:]:
            raise ShapeError(
                f"radar {radar.shape} and condition {sat.shape} disagree")
        z = tz.concat([radar, sat], axis=1)
        z = tz.leaky_relu(self.stem(z), 0.2)
        for conv in self.downs:
            z = tz.leaky_relu(conv(z), 0.2)
        return tz.sigmoid(self.head(z))


@dataclass(frozen=True)
class S2rBatch:
    """Time-aligned satellite inputs (with dem channel already attached when
    configured) and normalized radar targets."""
    sat: Tensor
    radar: Tensor


def attach_dem(sat, dem, dtype=np.float32):
    """Concatenate a shared [1, H, W] terrain channel onto [N, C, H, W]."""
    n, c, h, w = sat.shape
    tiled = np.ascontiguousarray(
        np.broadcast_to(dem.data.astype(dtype), (n, 1, h, w)))
    return tz.concat([sat, Tensor(tiled)], axis=1)


def make_s2r_optimizers(gen, disc):
    cfg = gen.config
    return (AdamW(gen.store, lr=cfg.lr, weight_decay=cfg.weight_decay),
            AdamW(disc.store, lr=cfg.lr, weight_decay=cfg.weight_decay))


def s2r_train_step(gen, disc, batch, gen_opt, disc_opt):
    """One discriminator update on detached fakes, then one generator update.

    Returns (generator LossReport, discriminator loss float).
    """
    cfg = gen.config
    lr_g = cosine_lr(gen_opt.t, cfg.total_steps, cfg.lr, cfg.min_lr)
    lr_d = cosine_lr(disc_opt.t, cfg.total_steps, cfg.lr, cfg.min_lr)

    with tz.no_tape():
        fake_detached = gen.forward(batch.sat)
    tape_d = tz.Tape()
    with tape_d:
        disc.store.watch_all(tape_d)
        scores_real = disc.forward(batch.radar, batch.sat)
        scores_fake = disc.forward(fake_detached, batch.sat)
        d_loss = discriminator_loss(scores_real, scores_fake)
    if not np.isfinite(d_loss.data):
        raise TrainingError(f"non-finite discriminator loss at step {disc_opt.t}")
    d_grads = tz.backward(d_loss)
    for name, p in disc.store.items():
        g = d_grads.get(p)
        if g is not None and not np.all(np.isfinite(g.data)):
            raise TrainingError(f"non-finite gradient in {name!r}")
    disc_opt.step(d_grads, lr_d)

    tape_g = tz.Tape()
    with tape_g:
        gen.store.watch_all(tape_g)
        fake = gen.forward(batch.sat)
        scores = disc.forward(fake, batch.sat)
        g_total, g_report = generator_loss(fake, batch.radar, scores, cfg.lam)
    if not np.isfinite(g_total.data):
        raise TrainingError(f"non-finite generator loss at step {gen_opt.t}")
    g_grads = tz.backward(g_total)
    for name, p in gen.store.items():
        g = g_grads.get(p)
        if g is not None and not np.all(np.isfinite(g.data)):
            raise TrainingError(f"non-finite gradient in {name!r}")
    gen_opt.step(g_grads, lr_g)
    return g_report, float(d_loss.data)


def generate(gen, sat_frame, dem=None):
    """Translate one [C, H, W] satellite frame to a RadarFramePred in mm/h."""
    cfg = gen.config
    with tz.no_tape():
        x = tz.reshape(sat_frame, (1,) + tuple(sat_frame.shape))
        if cfg.use_dem:
            if dem is None:
                raise ConfigError("generator configured with use_dem needs dem")
            x = attach_dem(x, dem, gen.dtype)
        norm = gen.forward(x).data[0]
    rate = np.clip(norm * cfg.rate_max, 0.0, cfg.rate_max)
    return RadarFramePred(values=Tensor(np.ascontiguousarray(rate)))


def pipeline_predict(stage1_model, gen, x, dem, timestamp):
    """Stage-1 forecast followed by per-frame translation.

    Returns a list of RadarFramePred with lead_hours 1..t_out. Stage-1
    output is clamped to [0, 1] before translation, matching the
    generator's input contract.
    """
    with tz.no_tape():
        yhat = stage1_model.forward(x, dem, timestamp).data
    yhat = np.clip(yhat, 0.0, 1.0)
    preds = []
    for i in range(yhat.shape[0]):
        frame = Tensor(np.ascontiguousarray(yhat[i]))
        pred = generate(gen, frame, dem)
        preds.append(RadarFramePred(values=pred.values, lead_hours=i + 1))
    return preds


def translate_frames(gen, frames, dem=None):
    """Translate a [T, C, H, W] stack frame by frame; lead_hours 1..T.

    Used both for pipeline predictions and for the upper-bound mode where
    ground-truth future satellite frames stand in for stage-1 output.
    """
    out = []
    for i in range(frames.shape[0]):
        frame = Tensor(np.ascontiguousarray(np.clip(frames.data[i], 0.0, 1.0)))
        pred = generate(gen, frame, dem)
        out.append(RadarFramePred(values=pred.values, lead_hours=i + 1))
    return out
