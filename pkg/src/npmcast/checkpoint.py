"""Parameter checkpoint files.

Layout, all integers little-endian u64 and payloads little-endian f32:

    magic "NPMCKPT1"
    count
    per record: name length, UTF-8 name, rank, extents, payload

Records are written in sorted name order so a checkpoint's bytes are a pure
function of its contents. Round-trips are bit-exact.
"""

import struct

import numpy as np

MAGIC = b"NPMCKPT1"


class CheckpointError(ValueError):
    """Malformed checkpoint bytes; message carries the byte offset."""


def save_checkpoint(path, arrays):
    """Write a name -> float32 ndarray map."""
    chunks = [MAGIC, struct.pack("<Q", len(arrays))]
    for name in sorted(arrays):
        arr = arrays[name]
        if arr.dtype != np.float32:
            raise TypeError(
                f"checkpoint payloads are f32; {name!r} has dtype {arr.dtype}")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<Q", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def _take(buf, offset, n, what):
    if offset + n > len(buf):
        raise CheckpointError(
            f"truncated checkpoint: needed {n} bytes for {what} at offset "
            f"{offset}, file has {len(buf)}")
    return buf[offset: offset + n], offset + n


def load_checkpoint(path):
    """Read back a name -> float32 ndarray map."""
    with open(path, "rb") as fh:
        buf = fh.read()
    head, off = _take(buf, 0, len(MAGIC), "magic")
    if head != MAGIC:
        raise CheckpointError(
            f"bad magic at offset 0: expected {MAGIC!r}, got {head!r}")
    raw, off = _take(buf, off, 8, "record count")
    count = struct.unpack("<Q", raw)[0]
    out = {}
    for i in range(count):
        raw, off = _take(buf, off, 8, f"name length of record {i}")
        name_len = struct.unpack("<Q", raw)[0]
        raw, off = _take(buf, off, name_len, f"name of record {i}")
        name = raw.decode("utf-8")
        raw, off = _take(buf, off, 8, f"rank of {name!r}")
        rank = struct.unpack("<Q", raw)[0]
        raw, off = _take(buf, off, 8 * rank, f"extents of {name!r}")
        shape = struct.unpack(f"<{rank}Q", raw) if rank else ()
        n_vals = int(np.prod(shape, dtype=np.int64)) if rank else 1
        raw, off = _take(buf, off, 4 * n_vals, f"payload of {name!r}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        out[name] = arr.astype(np.float32, copy=True)
    if off != len(buf):
        raise CheckpointError(
            f"{len(buf) - off} trailing bytes after last record at offset {off}")
    return out
