"""Loss oracles: closed-form MSE and KL values, self-consistency
properties, and strict score-domain checks."""

import numpy as np
import pytest

import npmcast.tensor as tz
from npmcast.losses import (EPS, LossReport, discriminator_loss,
                            frame_differences, generator_loss, mse_loss,
                            stage1_loss, temporal_consistency)
from npmcast.tensor import (ConfigError, DomainError, ShapeError, Tape,
                            Tensor, backward)


def scalar_kl_oracle(dp, dq, eps=EPS):
    """Plain-numpy softmax + KL over per-frame flattened differences."""
    dp = dp.reshape(dp.shape[0], -1).astype(np.float64)
    dq = dq.reshape(dq.shape[0], -1).astype(np.float64)
    def sm(a):
        e = np.exp(a - a.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    p, q = sm(dp), sm(dq)
    return float((p * (np.log(p + eps) - np.log(q + eps))).sum())


# --------------------------------------------------------------------- mse

def test_mse_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 2, 4, 4))
    b = rng.standard_normal((3, 2, 4, 4))
    got = float(mse_loss(Tensor(a), Tensor(b)).data)
    assert abs(got - np.mean((a - b) ** 2)) < 1e-12


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_loss(Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 3))))


def test_mse_zero_on_identical():
    a = Tensor(np.random.default_rng(1).standard_normal((4, 4)))
    assert float(mse_loss(a, a).data) == 0.0


# ------------------------------------------------------- frame differences

def test_frame_differences_values():
    s = Tensor(np.array([[1.0], [3.0], [6.0]]))
    d = frame_differences(s).data
    assert np.allclose(d, [[2.0], [3.0]])


def test_frame_differences_needs_two_frames():
    with pytest.raises(ShapeError):
        frame_differences(Tensor(np.zeros((1, 4))))


# ---------------------------------------------------- temporal consistency

def test_self_consistency_is_exactly_zero():
    rng = np.random.default_rng(2)
    s = Tensor(rng.standard_normal((4, 3, 8, 8)))
    val = float(temporal_consistency(s, s).data)
    assert abs(val) < 1e-9


def test_consistency_nonnegative_on_random_pairs():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        a = Tensor(rng.standard_normal((3, 2, 5, 5)))
        b = Tensor(rng.standard_normal((3, 2, 5, 5)))
        worst = min(worst, float(temporal_consistency(a, b).data))
    assert worst >= -1e-7


def test_consistency_matches_scalar_oracle_hand_cases():
    # two-frame cases: a single difference field per stack
    cases = [
        (np.array([[[0.0, 1.0]], [[2.0, 0.0]]]),
         np.array([[[1.0, 1.0]], [[1.0, 3.0]]])),
        (np.array([[[-1.0, 2.0]], [[0.5, 0.5]]]),
         np.array([[[0.0, 0.0]], [[0.0, 0.0]]])),
        (np.zeros((2, 1, 3)), np.arange(6.0).reshape(2, 1, 3)),
    ]
    for a, b in cases:
        got = float(temporal_consistency(Tensor(a), Tensor(b)).data)
        want = scalar_kl_oracle(np.diff(a, axis=0), np.diff(b, axis=0))
        assert abs(got - want) < 1e-9


def test_consistency_matches_oracle_on_longer_stacks():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((5, 2, 4, 4))
    b = rng.standard_normal((5, 2, 4, 4))
    got = float(temporal_consistency(Tensor(a), Tensor(b)).data)
    want = scalar_kl_oracle(np.diff(a, axis=0), np.diff(b, axis=0))
    assert abs(got - want) < 1e-9


def test_consistency_shape_mismatch():
    with pytest.raises(ShapeError):
        temporal_consistency(Tensor(np.zeros((3, 2, 2))),
                             Tensor(np.zeros((4, 2, 2))))


def test_consistency_is_differentiable():
    rng = np.random.default_rng(5)
    a = Tensor(rng.standard_normal((3, 2, 3, 3)))
    b = Tensor(rng.standard_normal((3, 2, 3, 3)))
    tape = Tape()
    with tape:
        tape.watch(a)
        loss = temporal_consistency(a, b)
    g = backward(loss).get(a)
    assert g is not None and g.shape == a.shape
    num = tz.finite_diff_grad(
        lambda t: temporal_consistency(t, b), a).data
    assert np.abs(g.data - num).max() < 1e-6


# ---------------------------------------------------------------- stage 1

def test_stage1_loss_composition():
    rng = np.random.default_rng(6)
    pred = Tensor(rng.standard_normal((3, 1, 4, 4)))
    target = Tensor(rng.standard_normal((3, 1, 4, 4)))
    total, report = stage1_loss(pred, target, alpha=0.25)
    assert isinstance(report, LossReport)
    assert abs(report.total - (report.mse + 0.25 * report.reg)) < 1e-9
    assert abs(float(total.data) - report.total) < 1e-12
    assert report.alpha == 0.25


def test_stage1_alpha_zero_is_pure_mse():
    rng = np.random.default_rng(7)
    pred = Tensor(rng.standard_normal((2, 1, 3, 3)))
    target = Tensor(rng.standard_normal((2, 1, 3, 3)))
    total, report = stage1_loss(pred, target, alpha=0.0)
    assert float(total.data) == report.mse


def test_stage1_negative_alpha_rejected():
    with pytest.raises(ConfigError):
        stage1_loss(Tensor(np.zeros((2, 1, 2, 2))),
                    Tensor(np.zeros((2, 1, 2, 2))), alpha=-0.1)


# ----------------------------------------------------------- adversarial

def test_generator_loss_matches_closed_form():
    rng = np.random.default_rng(8)
    fake = rng.standard_normal((2, 1, 4, 4))
    real = rng.standard_normal((2, 1, 4, 4))
    scores = rng.uniform(0.1, 0.9, size=(2, 1, 2, 2))
    total, report = generator_loss(Tensor(fake), Tensor(real),
                                   Tensor(scores), lam=0.05)
    want_mse = np.mean((fake - real) ** 2)
    want_adv = np.mean(np.log(np.maximum(1.0 - scores, EPS)))
    assert abs(report.mse - want_mse) < 1e-6
    assert abs(report.adversarial - want_adv) < 1e-6
    assert abs(float(total.data) - (want_mse + 0.05 * want_adv)) < 1e-6
    assert report.lam == 0.05


def test_generator_loss_improves_when_fooling():
    rng = np.random.default_rng(9)
    fake = Tensor(rng.standard_normal((1, 1, 2, 2)))
    real = Tensor(rng.standard_normal((1, 1, 2, 2)))
    lo, _ = generator_loss(fake, real, Tensor(np.full((1, 1, 1, 1), 0.9)),
                           lam=0.5)
    hi, _ = generator_loss(fake, real, Tensor(np.full((1, 1, 1, 1), 0.1)),
                           lam=0.5)
    assert float(lo.data) < float(hi.data)


def test_discriminator_loss_matches_bce():
    rng = np.random.default_rng(10)
    sr = rng.uniform(0.2, 0.8, size=(2, 1, 3, 3))
    sf = rng.uniform(0.2, 0.8, size=(2, 1, 3, 3))
    got = float(discriminator_loss(Tensor(sr), Tensor(sf)).data)
    want = -(np.mean(np.log(sr)) + np.mean(np.log(1.0 - sf)))
    assert abs(got - want) < 1e-6


def test_discriminator_loss_at_chance_is_2log2():
    s = Tensor(np.full((1, 1, 2, 2), 0.5))
    got = float(discriminator_loss(s, s).data)
    assert abs(got - 2.0 * np.log(2.0)) < 1e-6


def test_score_domain_enforced():
    ok = Tensor(np.full((1, 1, 1, 1), 0.5))
    for bad_val in (-0.2, 1.3):
        bad = Tensor(np.full((1, 1, 1, 1), bad_val))
        with pytest.raises(DomainError):
            discriminator_loss(bad, ok)
        with pytest.raises(DomainError):
            discriminator_loss(ok, bad)
        with pytest.raises(DomainError):
            generator_loss(ok, ok, bad)
    # saturated-sigmoid endpoints are legal; the clamped logs keep it finite
    for edge_val in (0.0, 1.0):
        edge = Tensor(np.full((1, 1, 1, 1), edge_val))
        assert np.isfinite(float(discriminator_loss(edge, ok).data))
        total, _ = generator_loss(ok, ok, edge)
        assert np.isfinite(float(total.data))


def test_negative_lambda_rejected():
    z = Tensor(np.zeros((1, 1, 2, 2)))
    with pytest.raises(ConfigError):
        generator_loss(z, z, Tensor(np.full((1, 1, 1, 1), 0.5)), lam=-1.0)
