"""Optimizer and learning-rate schedule.

Adaptive moments with decoupled weight decay; the decay is applied to the
parameter directly rather than folded into the gradient. The schedule is a
cosine ramp from the base rate down to a floor at total_steps.
"""

import numpy as np

from .tensor import ConfigError, Tensor


def cosine_lr(step, total_steps, base_lr, min_lr=0.0):
    """Cosine decay: base_lr at step 0, min_lr at and beyond total_steps."""
    if total_steps <= 0:
        raise ConfigError(f"total_steps must be positive, got {total_steps}")
    frac = min(max(step, 0), total_steps) / total_steps
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + np.cos(np.pi * frac))


class AdamW:
    """Decoupled-weight-decay adaptive moment estimation over a ParamStore."""

    def __init__(self, store, lr=1e-4, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01):
        self.store = store
        self.base_lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in store.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in store.items()}

    def step(self, grads, lr=None):
        """Apply one update from a Grads map; parameters without a gradient
        on this tape are left untouched."""
        if lr is None:
            lr = self.base_lr
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            gt = grads.get(p)
            if gt is None:
                continue
            g = gt.data
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            denom = np.sqrt(v / bc2) + self.eps
            upd = (m / bc1) / denom + self.weight_decay * p.data
            self.store.replace(name, Tensor((p.data - lr * upd).astype(p.dtype)))

    def state_arrays(self, prefix="opt."):
        """Optimizer state as named arrays for checkpointing."""
        out = {prefix + "step": np.array([self.t], dtype=np.float32)}
        for name in sorted(self.m):
            out[prefix + "m." + name] = self.m[name]
            out[prefix + "v." + name] = self.v[name]
        return out

    def load_state_arrays(self, arrays, prefix="opt."):
        self.t = int(arrays[prefix + "step"][0])
        for name in self.m:
            self.m[name] = np.array(arrays[prefix + "m." + name],
                                    dtype=self.m[name].dtype)
            self.v[name] = np.array(arrays[prefix + "v." + name],
                                    dtype=self.v[name].dtype)
