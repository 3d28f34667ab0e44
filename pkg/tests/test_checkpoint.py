"""Checkpoint format: bit-exact round-trips, deterministic bytes, and
malformed-input diagnostics with byte offsets."""

import struct

import numpy as np
import pytest

from npmcast.checkpoint import (MAGIC, CheckpointError, load_checkpoint,
                                save_checkpoint)


def random_arrays(rng, n):
    out = {}
    for i in range(n):
        rank = int(rng.integers(0, 4))
        shape = tuple(int(rng.integers(1, 5)) for _ in range(rank))
        out[f"p{i}.weight"] = rng.standard_normal(shape).astype(np.float32)
    return out


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arrays = random_arrays(rng, 7)
    path = tmp_path / "a.npmckpt"
    save_checkpoint(path, arrays)
    back = load_checkpoint(path)
    assert set(back) == set(arrays)
    for k in arrays:
        assert back[k].dtype == np.float32
        assert back[k].shape == arrays[k].shape
        assert np.array_equal(
            back[k].view(np.uint32), arrays[k].view(np.uint32))


def test_bytes_are_deterministic_over_insert_order(tmp_path):
    a = {"b": np.ones(2, dtype=np.float32), "a": np.zeros(3, dtype=np.float32)}
    b = {"a": np.zeros(3, dtype=np.float32), "b": np.ones(2, dtype=np.float32)}
    pa, pb = tmp_path / "a", tmp_path / "b"
    save_checkpoint(pa, a)
    save_checkpoint(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_scalar_rank_zero_roundtrip(tmp_path):
    arrays = {"s": np.float32(3.5).reshape(())}
    path = tmp_path / "s.npmckpt"
    save_checkpoint(path, {"s": np.asarray(arrays["s"], dtype=np.float32)})
    back = load_checkpoint(path)
    assert back["s"].shape == ()
    assert float(back["s"]) == 3.5


def test_non_f32_rejected(tmp_path):
    with pytest.raises(TypeError, match="f32"):
        save_checkpoint(tmp_path / "x", {"p": np.zeros(2, dtype=np.float64)})


def test_unicode_names_roundtrip(tmp_path):
    arrays = {"stage1.блок.weight": np.ones(1, dtype=np.float32)}
    path = tmp_path / "u.npmckpt"
    save_checkpoint(path, arrays)
    assert set(load_checkpoint(path)) == set(arrays)


def test_empty_checkpoint_roundtrip(tmp_path):
    path = tmp_path / "e.npmckpt"
    save_checkpoint(path, {})
    assert load_checkpoint(path) == {}
    assert path.read_bytes() == MAGIC + struct.pack("<Q", 0)


def test_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"NOTCKPT0" + struct.pack("<Q", 0))
    with pytest.raises(CheckpointError, match="offset 0"):
        load_checkpoint(path)


def test_truncation_reports_offset_and_field(tmp_path):
    good = tmp_path / "good"
    save_checkpoint(good, {"param": np.arange(6, dtype=np.float32)})
    blob = good.read_bytes()
    # chop into the payload
    bad = tmp_path / "trunc"
    bad.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError, match="payload of 'param'"):
        load_checkpoint(bad)
    # chop into the header
    bad.write_bytes(blob[:10])
    with pytest.raises(CheckpointError, match="record count"):
        load_checkpoint(bad)


def test_trailing_bytes_rejected(tmp_path):
    good = tmp_path / "good"
    save_checkpoint(good, {"p": np.zeros(2, dtype=np.float32)})
    bad = tmp_path / "trail"
    bad.write_bytes(good.read_bytes() + b"xx")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(bad)


def test_many_random_instances_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    for i in range(25):
        arrays = random_arrays(rng, int(rng.integers(1, 5)))
        path = tmp_path / f"r{i}.npmckpt"
        save_checkpoint(path, arrays)
        back = load_checkpoint(path)
        assert set(back) == set(arrays)
        for k in arrays:
            assert np.array_equal(back[k].view(np.uint32),
                                  arrays[k].view(np.uint32))
