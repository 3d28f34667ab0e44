"""Calendar encodings: closed-form values, injectivity over the full day
range, timestamp arithmetic, and condition injection."""

import math

import numpy as np
import pytest

import npmcast.tensor as tz
from npmcast.embedding import (DAYS_PER_YEAR, HOURS_PER_DAY, TimeEmbedding,
                               TimeStamp, inject_condition, positional_encode)
from npmcast.layers import ParamStore
from npmcast.tensor import (ConfigError, ShapeError, Tape, Tensor, backward)


# ---------------------------------------------------------------- timestamp

def test_timestamp_validation():
    TimeStamp(day=0, hour=0)
    TimeStamp(day=365, hour=23)
    for day, hour in ((-1, 0), (366, 0), (0, -1), (0, 24)):
        with pytest.raises(ConfigError):
            TimeStamp(day=day, hour=hour)


def test_timestamp_advance_wraps_hours_and_days():
    t = TimeStamp(day=4, hour=23)
    assert t.advanced(2) == TimeStamp(day=5, hour=1)
    assert t.advanced(0) == t
    assert t.advanced(24) == TimeStamp(day=5, hour=23)
    assert TimeStamp(day=365, hour=23).advanced(1) == TimeStamp(day=0, hour=0)
    assert TimeStamp(day=0, hour=0).advanced(24 * 366) == TimeStamp(0, 0)


def test_timestamp_constants():
    assert DAYS_PER_YEAR == 366
    assert HOURS_PER_DAY == 24


# ------------------------------------------------------- positional encode

def test_positional_encode_spot_values():
    # independent scalar evaluation with math.sin/cos at full precision
    d = 8
    x = 123.0
    got = positional_encode(x, d)
    for i in range(d // 2):
        arg = x / 10000.0 ** (2.0 * i / d)
        assert abs(got[2 * i] - math.sin(arg)) < 1e-12
        assert abs(got[2 * i + 1] - math.cos(arg)) < 1e-12


def test_positional_encode_zero_day():
    got = positional_encode(0, 32)
    assert np.allclose(got[0::2], 0.0, atol=1e-15)
    assert np.allclose(got[1::2], 1.0, atol=1e-15)


def test_positional_encode_range_and_width_checks():
    for x in (0, 1, 47, 365):
        v = positional_encode(x, 32)
        assert v.shape == (32,)
        assert v.dtype == np.float64
        assert float(np.abs(v).max()) <= 1.0
    with pytest.raises(ConfigError):
        positional_encode(1, 0)
    with pytest.raises(ConfigError):
        positional_encode(1, 7)


def test_positional_encode_injective_over_days():
    codes = np.stack([positional_encode(d, 32) for d in range(366)])
    assert np.abs(codes).max() <= 1.0
    worst = np.inf
    for i in range(366):
        gaps = np.abs(codes - codes[i]).max(axis=1)
        gaps[i] = np.inf
        worst = min(worst, float(gaps.min()))
    assert worst > 1e-9


def test_positional_encode_injective_over_hours():
    codes = np.stack([positional_encode(h, 32) for h in range(24)])
    for i in range(24):
        for j in range(i + 1, 24):
            assert np.abs(codes[i] - codes[j]).max() > 1e-9


# ------------------------------------------------------------ embedding MLP

def test_time_embedding_output_shape_and_determinism():
    store = ParamStore()
    emb = TimeEmbedding(store, "emb", 12, np.random.default_rng(0), d_pe=8)
    t = TimeStamp(day=200, hour=15)
    a = emb(t).data
    b = emb(t).data
    assert a.shape == (12,)
    assert np.array_equal(a, b)


def test_time_embedding_distinguishes_days_and_hours():
    store = ParamStore()
    emb = TimeEmbedding(store, "emb", 6, np.random.default_rng(1), d_pe=8)
    base = emb(TimeStamp(day=10, hour=5)).data
    assert np.abs(emb(TimeStamp(day=11, hour=5)).data - base).max() > 0
    assert np.abs(emb(TimeStamp(day=10, hour=6)).data - base).max() > 0


def test_time_embedding_zero_weights_collapse_condition():
    store = ParamStore()
    emb = TimeEmbedding(store, "emb", 4, np.random.default_rng(2), d_pe=8)
    store.load_arrays({k: np.zeros(v.shape, dtype=np.float32)
                       for k, v in store.items()})
    a = emb(TimeStamp(day=0, hour=0)).data
    b = emb(TimeStamp(day=300, hour=12)).data
    assert np.array_equal(a, b)
    assert np.all(a == 0.0)


def test_time_embedding_gradients_flow_to_params():
    store = ParamStore()
    emb = TimeEmbedding(store, "emb", 4, np.random.default_rng(3), d_pe=8,
                        dtype=np.float64)
    tape = Tape()
    with tape:
        store.watch_all(tape)
        out = emb(TimeStamp(day=100, hour=8))
        loss = tz.reduce_sum(out * out)
    grads = backward(loss)
    g = grads.get(store["emb.fc2.weight"])
    assert g is not None and np.abs(g.data).max() > 0


# -------------------------------------------------------- inject_condition

def test_inject_condition_adds_per_channel_bias():
    rng = np.random.default_rng(4)
    feats = rng.standard_normal((2, 3, 4, 4))
    cond = np.array([1.0, -2.0, 0.5])
    out = inject_condition(Tensor(feats), Tensor(cond)).data
    want = feats + cond.reshape(1, 3, 1, 1)
    assert np.allclose(out, want, atol=1e-6)


def test_inject_condition_shape_mismatch():
    with pytest.raises(ShapeError):
        inject_condition(Tensor(np.zeros((1, 3, 2, 2), dtype=np.float32)),
                         Tensor(np.zeros(4, dtype=np.float32)))


def test_inject_condition_gradient_is_spatial_sum():
    feats = Tensor(np.zeros((2, 3, 4, 5), dtype=np.float64))
    cond = Tensor(np.zeros(3, dtype=np.float64))
    w = Tensor(np.random.default_rng(5).standard_normal((2, 3, 4, 5)))
    tape = Tape()
    with tape:
        tape.watch(cond)
        loss = tz.reduce_sum(inject_condition(feats, cond) * w)
    g = backward(loss).get(cond).data
    assert np.allclose(g, w.data.sum(axis=(0, 2, 3)), atol=1e-12)
