"""Calendar conditioning: sinusoidal day/hour encodings, the embedding MLP,
and injection of the condition vector into the translator latent.

A timestamp is (day-of-year, hour-of-day) with day in 0..365 (366 values so
leap years index directly) and hour in 0..23. Both encodings are sinusoidal
position codes of width d_pe; their concatenation feeds a two-layer MLP
whose output is added to the latent as a per-channel bias.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .layers import Linear
from .tensor import ConfigError, ShapeError, Tensor

DAYS_PER_YEAR = 366
HOURS_PER_DAY = 24


@dataclass(frozen=True)
class TimeStamp:
    day: int
    hour: int

    def __post_init__(self):
        if not (0 <= self.day <= 365):
            raise ConfigError(f"day must be in 0..365, got {self.day}")
        if not (0 <= self.hour <= 23):
            raise ConfigError(f"hour must be in 0..23, got {self.hour}")

    def advanced(self, hours):
        """Timestamp `hours` later, wrapping hour 23 -> 0 and day 365 -> 0."""
        total = self.hour + int(hours)
        return TimeStamp((self.day + total // HOURS_PER_DAY) % DAYS_PER_YEAR,
                         total % HOURS_PER_DAY)


def positional_encode(x, d):
    """Sinusoidal code of scalar x at width d: out[2i] = sin(x / 10000^(2i/d)),
    out[2i+1] = cos of the same argument. Returns float64."""
    if d < 2 or d % 2:
        raise ConfigError(f"encoding width must be even and >= 2, got {d}")
    i = np.arange(d // 2, dtype=np.float64)
    arg = float(x) / np.power(10000.0, 2.0 * i / d)
    out = np.empty(d, dtype=np.float64)
    out[0::2] = np.sin(arg)
    out[1::2] = np.cos(arg)
    return out


class TimeEmbedding:
    """Linear -> GELU -> Linear over the concatenated day/hour encodings."""

    def __init__(self, store, prefix, d_cond, rng, d_pe=32, dtype=np.float32):
        self.d_pe = d_pe
        self.d_cond = d_cond
        self.dtype = dtype
        self.fc1 = Linear(store, prefix + ".fc1", 2 * d_pe, 2 * d_pe, rng,
                          dtype=dtype)
        self.fc2 = Linear(store, prefix + ".fc2", 2 * d_pe, d_cond, rng,
                          dtype=dtype)

    def __call__(self, t):
        pe = np.concatenate([positional_encode(t.day, self.d_pe),
                             positional_encode(t.hour, self.d_pe)])
        x = Tensor(pe.astype(self.dtype).reshape(1, 2 * self.d_pe))
        out = self.fc2(tz.gelu(self.fc1(x)))
        return tz.reshape(out, (self.d_cond,))


def inject_condition(features, cond):
    """Add a per-channel bias to a [N, C, H, W] latent."""
    n, c, h, w = features.shape
    if cond.shape != (c,):
        raise ShapeError(
            f"condition length {cond.shape} does not match {c} channels")
    return features + tz.reshape(cond, (1, c, 1, 1))
