"""Training objectives.

Stage 1 uses mean-squared error plus a temporal-consistency regularizer:
consecutive-frame differences of prediction and target are each softmaxed
over their flattened per-frame extent and compared with a KL divergence.
Stage 2's generator adds a non-saturating-style adversarial term
mean(log(1 - D(fake))) to the MSE; its discriminator trains with binary
cross-entropy.

All returned losses are scalar tensors attached to the active tape; the
float summaries travel in a LossReport.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as tz
from .tensor import ConfigError, DomainError, ShapeError

EPS = 1e-8


@dataclass(frozen=True)
class LossReport:
    mse: float
    reg: float = 0.0
    adversarial: float = 0.0
    total: float = 0.0
    alpha: float = 0.0
    lam: float = 0.0


def mse_loss(pred, target):
    """Mean of squared differences over all elements."""
    if pred.shape != target.shape:
        raise ShapeError(
            f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    d = pred - target
    return tz.reduce_mean(d * d)


def frame_differences(s):
    """Consecutive-frame differences along axis 0: out[i] = s[i+1] - s[i]."""
    t = s.shape[0]
    if t < 2:
        raise ShapeError(
            f"frame_differences needs at least 2 frames, got {t}")
    return tz.narrow(s, 0, 1, t - 1) - tz.narrow(s, 0, 0, t - 1)


def temporal_consistency(pred, target):
    """KL divergence between softmaxed frame-difference fields.

    Both difference stacks are flattened per frame and softmaxed so each
    frame difference is a probability distribution; the epsilon floor is
    applied inside both logs, which keeps the self-divergence exactly zero.
    """
    if pred.shape != target.shape:
        raise ShapeError(
            f"temporal_consistency shapes differ: {pred.shape} vs {target.shape}")
    dp = frame_differences(pred)
    dq = frame_differences(target)
    k = dp.shape[0]
    flat = int(np.prod(dp.shape[1:], dtype=np.int64))
    p = tz.softmax(tz.reshape(dp, (k, flat)), axis=1)
    q = tz.softmax(tz.reshape(dq, (k, flat)), axis=1)
    return tz.reduce_sum(p * (tz.log(p + EPS) - tz.log(q + EPS)))


def stage1_loss(pred, target, alpha=0.1):
    """MSE plus alpha times the temporal-consistency term."""
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    mse = mse_loss(pred, target)
    reg = temporal_consistency(pred, target)
    total = mse + float(alpha) * reg
    report = LossReport(mse=float(mse.data), reg=float(reg.data),
                        total=float(total.data), alpha=float(alpha))
    return total, report


def _check_scores(scores, who):
    # exact 0/1 is fine (f32 sigmoid saturates); the logs are clamped
    s = scores.data
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise DomainError(
            f"{who}: discriminator scores must lie in [0, 1]; "
            f"got range [{s.min():.3g}, {s.max():.3g}]")


def generator_loss(fake, real, scores_fake, lam=0.01):
    """MSE against the real radar plus lam * mean(log(1 - D(fake)))."""
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    _check_scores(scores_fake, "generator_loss")
    mse = mse_loss(fake, real)
    adv = tz.reduce_mean(tz.log(tz.clamp_min(1.0 - scores_fake, EPS)))
    total = mse + float(lam) * adv
    report = LossReport(mse=float(mse.data), adversarial=float(adv.data),
                        total=float(total.data), lam=float(lam))
    return total, report


def discriminator_loss(scores_real, scores_fake):
    """Binary cross-entropy pushing real scores to 1 and fake scores to 0."""
    _check_scores(scores_real, "discriminator_loss")
    _check_scores(scores_fake, "discriminator_loss")
    term_real = tz.reduce_mean(tz.log(tz.clamp_min(scores_real, EPS)))
    term_fake = tz.reduce_mean(tz.log(tz.clamp_min(1.0 - scores_fake, EPS)))
    return -(term_real + term_fake)
