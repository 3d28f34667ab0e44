"""Dataset container: binary frame files, the text manifest, year-month
partitioning, the season-aware sampler, window assembly, cropping, and
normalization.

Frame file layout (all little-endian): magic "NPMFRM1\\0", width u32,
height u32, channel count u8, one 8-byte NUL-padded ASCII tag per channel,
then each channel's float32 row-major payload in tag order.

The manifest is line-oriented text with a versioned header; records hold
(ISO timestamp, year, month, 0-based day-of-year, hour, relative path,
split tag). Timestamps must be strictly increasing and every consecutive
spacing a positive multiple of the frame interval.
"""

import os
import struct
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np

from .embedding import TimeStamp
from .model_stage1 import ForecastBatch
from .tensor import ConfigError, ShapeError, Tensor

FRAME_MAGIC = b"NPMFRM1\x00"
MANIFEST_HEADER = "NPMMANIFEST v1"
KNOWN_TAGS = ("IR105", "WV063", "WV073", "RRATE", "DEM", "RRATEPRD")
SAT_CHANNELS = ("IR105", "WV063", "WV073")
RADAR_CHANNEL = "RRATE"
_EPOCH = datetime(2000, 1, 1)


class FrameParseError(ValueError):
    """Malformed frame file; message carries the byte offset."""


class ManifestError(ValueError):
    """Malformed manifest text; message carries the line number."""


class WindowError(ValueError):
    """Requested training window crosses a gap, boundary, or split edge."""


def _validate_channel_values(tags, data, path):
    for ci, tag in enumerate(tags):
        if tag in ("RRATE", "RRATEPRD") and float(data[ci].min()) < 0.0:
            raise FrameParseError(
                f"{path}: channel {tag!r} has negative rain rate "
                f"{data[ci].min():.4g}")


def write_frame(path, data, tags):
    """Write [C, H, W] float32 data under the given channel tags."""
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 3 or len(tags) != data.shape[0]:
        raise ShapeError(
            f"frame data must be [C, H, W] with one tag per channel; got "
            f"{data.shape} and {len(tags)} tags")
    c, h, w = data.shape
    if w >= 1 << 32 or h >= 1 << 32:
        raise ConfigError("frame extents exceed u32")
    for tag in tags:
        if tag not in KNOWN_TAGS:
            raise ConfigError(f"unknown channel tag {tag!r}")
    _validate_channel_values(tags, data, path)
    with open(path, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(struct.pack("B", c))
        for tag in tags:
            fh.write(tag.encode("ascii").ljust(8, b"\x00"))
        fh.write(data.astype("<f4").tobytes())


def read_frame(path):
    """Read a frame file back as ([C, H, W] float32, tag tuple)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 8 or buf[:8] != FRAME_MAGIC:
        raise FrameParseError(
            f"{path}: bad magic at offset 0: got {buf[:8]!r}, "
            f"expected {FRAME_MAGIC!r}")
    if len(buf) < 17:
        raise FrameParseError(
            f"{path}: truncated header at offset {len(buf)}, need 17 bytes")
    w, h = struct.unpack("<II", buf[8:16])
    c = buf[16]
    off = 17
    tags = []
    for i in range(c):
        if off + 8 > len(buf):
            raise FrameParseError(
                f"{path}: truncated channel tag {i} at offset {off}")
        tag = buf[off: off + 8].rstrip(b"\x00").decode("ascii", "replace")
        if tag not in KNOWN_TAGS:
            raise FrameParseError(
                f"{path}: unknown channel tag {tag!r} at offset {off}")
        tags.append(tag)
        off += 8
    need = c * h * w * 4
    if len(buf) - off != need:
        raise FrameParseError(
            f"{path}: payload at offset {off} is {len(buf) - off} bytes, "
            f"expected {need} ({c}x{h}x{w} f32)")
    data = np.frombuffer(buf, dtype="<f4", count=c * h * w, offset=off)
    data = np.ascontiguousarray(data.reshape(c, h, w), dtype=np.float32)
    _validate_channel_values(tags, data, path)
    return data, tuple(tags)


@dataclass(frozen=True)
class FrameRecord:
    iso: str
    year: int
    month: int
    day_of_year: int
    hour: int
    path: str
    split: str

    def epoch_hours(self):
        dt = datetime.fromisoformat(self.iso)
        return (dt - _EPOCH).total_seconds() / 3600.0


@dataclass
class Manifest:
    grid: tuple
    interval_hours: int
    channels: tuple
    bounds: dict
    dem_path: str
    records: list
    root: str = "."

    def validate(self):
        if self.interval_hours < 1:
            raise ManifestError("interval_hours must be >= 1")
        for name in self.channels:
            if name not in self.bounds:
                raise ManifestError(f"channel {name!r} missing bounds")
            lo, hi = self.bounds[name]
            if not lo < hi:
                raise ManifestError(f"bounds for {name!r} need min < max")
        prev = None
        for i, rec in enumerate(self.records):
            if rec.split not in ("train", "test"):
                raise ManifestError(f"record {i}: bad split {rec.split!r}")
            if not (1 <= rec.month <= 12 and 0 <= rec.day_of_year <= 365
                    and 0 <= rec.hour <= 23):
                raise ManifestError(f"record {i}: calendar fields out of range")
            eh = rec.epoch_hours()
            if prev is not None:
                gap = eh - prev
                if gap <= 0:
                    raise ManifestError(
                        f"record {i}: timestamps not strictly increasing")
                if abs(gap / self.interval_hours - round(gap / self.interval_hours)) > 1e-9:
                    raise ManifestError(
                        f"record {i}: spacing {gap} h is not a multiple of "
                        f"the {self.interval_hours} h interval")
            prev = eh

    def frame_path(self, rec):
        return os.path.join(self.root, rec.path)

    def dem_full_path(self):
        return os.path.join(self.root, self.dem_path)

    def save(self, path):
        lines = [MANIFEST_HEADER,
                 f"grid {self.grid[0]} {self.grid[1]}",
                 f"interval_hours {self.interval_hours}",
                 "channels " + " ".join(self.channels)]
        for name in self.channels:
            lo, hi = self.bounds[name]
            lines.append(f"bounds {name} {lo!r} {hi!r}")
        lines.append(f"dem {self.dem_path}")
        for r in self.records:
            lines.append(f"record {r.iso} {r.year} {r.month} {r.day_of_year} "
                         f"{r.hour} {r.path} {r.split}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def load(path):
        root = os.path.dirname(os.path.abspath(path))
        grid = None
        interval = None
        channels = None
        bounds = {}
        dem_path = None
        records = []
        with open(path) as fh:
            raw = fh.read().splitlines()
        if not raw or raw[0].strip() != MANIFEST_HEADER:
            raise ManifestError(
                f"line 1: expected header {MANIFEST_HEADER!r}, "
                f"got {raw[0].strip()!r}" if raw else "empty manifest")
        for ln, line in enumerate(raw[1:], start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kind = parts[0]
            try:
                if kind == "grid":
                    grid = (int(parts[1]), int(parts[2]))
                elif kind == "interval_hours":
                    interval = int(parts[1])
                elif kind == "channels":
                    channels = tuple(parts[1:])
                elif kind == "bounds":
                    bounds[parts[1]] = (float(parts[2]), float(parts[3]))
                elif kind == "dem":
                    dem_path = parts[1]
                elif kind == "record":
                    records.append(FrameRecord(
                        iso=parts[1], year=int(parts[2]), month=int(parts[3]),
                        day_of_year=int(parts[4]), hour=int(parts[5]),
                        path=parts[6], split=parts[7]))
                else:
                    raise ManifestError(f"line {ln}: unknown directive {kind!r}")
            except (IndexError, ValueError) as e:
                if isinstance(e, ManifestError):
                    raise
                raise ManifestError(f"line {ln}: cannot parse {line!r}: {e}")
        if grid is None or interval is None or channels is None or dem_path is None:
            raise ManifestError("manifest missing grid/interval/channels/dem")
        m = Manifest(grid=grid, interval_hours=interval, channels=channels,
                     bounds=bounds, dem_path=dem_path, records=records,
                     root=root)
        m.validate()
        return m


def normalize(values, bounds):
    lo, hi = bounds
    return (np.asarray(values, dtype=np.float32) - lo) / (hi - lo)


def denormalize(values, bounds):
    lo, hi = bounds
    return np.asarray(values, dtype=np.float32) * (hi - lo) + lo


@dataclass(frozen=True)
class Subset:
    year: int
    month: int
    indices: tuple


def partition_by_month(manifest, split=None):
    """Group record indices by (year, month); optionally filter by split."""
    groups = {}
    for i, rec in enumerate(manifest.records):
        if split is not None and rec.split != split:
            continue
        groups.setdefault((rec.year, rec.month), []).append(i)
    return [Subset(year=y, month=m, indices=tuple(ix))
            for (y, m), ix in sorted(groups.items())]


def _window_ok(manifest, index, t_in, t_out):
    lo = index - t_in + 1
    hi = index + t_out
    if lo < 0 or hi >= len(manifest.records):
        return False
    recs = manifest.records[lo: hi + 1]
    split = recs[0].split
    prev = recs[0].epoch_hours()
    for rec in recs[1:]:
        eh = rec.epoch_hours()
        if abs(eh - prev - manifest.interval_hours) > 1e-9 or rec.split != split:
            return False
        prev = eh
    return True


class SeasonAwareSampler:
    """Three-stage draw: calendar month by (normalized) weight, then a
    (year, month) subset uniformly among those with at least one valid
    window, then an index uniformly within the subset with rejection of
    indices whose window crosses a gap, boundary, or split edge."""

    def __init__(self, manifest, t_in, t_out, split="train",
                 oversample_weights=None):
        self.manifest = manifest
        self.t_in = t_in
        self.t_out = t_out
        weights = {m: 1.0 for m in range(1, 13)}
        if oversample_weights:
            for m, wgt in oversample_weights.items():
                if m not in weights:
                    raise ConfigError(f"oversample month {m!r} not in 1..12")
                if wgt < 0:
                    raise ConfigError(f"negative oversample weight for month {m}")
                weights[m] = float(wgt)
        self._subsets = partition_by_month(manifest, split)
        self._valid = {}
        by_month = {}
        for si, sub in enumerate(self._subsets):
            valid = tuple(i for i in sub.indices
                          if _window_ok(manifest, i, t_in, t_out))
            self._valid[si] = frozenset(valid)
            if valid:
                by_month.setdefault(sub.month, []).append(si)
        selectable = sorted(m for m, wgt in weights.items() if wgt > 0)
        missing = [m for m in selectable if m not in by_month]
        if missing:
            raise ConfigError(
                f"months with zero valid {t_in}+{t_out} windows in split "
                f"{split!r}: {missing}")
        total = sum(weights[m] for m in selectable)
        self._months = selectable
        self._probs = np.array([weights[m] / total for m in selectable])
        self._by_month = by_month

    def month_probabilities(self):
        return {m: float(p) for m, p in zip(self._months, self._probs)}

    def sample(self, rng):
        """Draw one valid record index."""
        month = self._months[rng.choice(len(self._months), p=self._probs)]
        choices = self._by_month[month]
        si = choices[rng.integers(0, len(choices))]
        sub = self._subsets[si]
        valid = self._valid[si]
        for _ in range(100000):
            idx = sub.indices[rng.integers(0, len(sub.indices))]
            if idx in valid:
                return idx
        raise RuntimeError("sampler failed to find a valid window")


def load_frame_record(manifest, index):
    """Read one record's frame; returns ({tag: [H, W] float32}, record)."""
    rec = manifest.records[index]
    data, tags = read_frame(manifest.frame_path(rec))
    if tags != tuple(manifest.channels):
        raise FrameParseError(
            f"{rec.path}: channel tags {tags} do not match manifest "
            f"{tuple(manifest.channels)}")
    return {tag: data[i] for i, tag in enumerate(tags)}, rec


def load_dem(manifest):
    """Read and normalize the terrain field to [0, 1]."""
    data, tags = read_frame(manifest.dem_full_path())
    if tags != ("DEM",):
        raise FrameParseError(
            f"{manifest.dem_path}: expected a single DEM channel, got {tags}")
    dem = data[0]
    lo, hi = float(dem.min()), float(dem.max())
    if hi <= lo:
        return Tensor(np.zeros((1,) + dem.shape, dtype=np.float32))
    return Tensor(((dem - lo) / (hi - lo))[None])


def _norm_sat_stack(manifest, index):
    frame, rec = load_frame_record(manifest, index)
    chans = [normalize(frame[name], manifest.bounds[name])
             for name in SAT_CHANNELS]
    return np.stack(chans, axis=0), frame, rec


def make_window(manifest, index, t_in, t_out):
    """Assemble the ForecastBatch whose last input frame is `index`."""
    if t_in < 1 or t_out < 1:
        raise ConfigError(
            f"window needs t_in >= 1 and t_out >= 1, got {t_in}+{t_out}")
    if not _window_ok(manifest, index, t_in, t_out):
        raise WindowError(
            f"no contiguous single-split window of {t_in}+{t_out} frames "
            f"ending at record {index}")
    xs = []
    ys = []
    for i in range(index - t_in + 1, index + 1):
        stack, _, _ = _norm_sat_stack(manifest, i)
        xs.append(stack)
    for i in range(index + 1, index + t_out + 1):
        stack, _, _ = _norm_sat_stack(manifest, i)
        ys.append(stack)
    rec = manifest.records[index]
    return ForecastBatch(
        x=Tensor(np.stack(xs, axis=0)),
        y=Tensor(np.stack(ys, axis=0)),
        dem=load_dem(manifest),
        timestamp=TimeStamp(day=rec.day_of_year, hour=rec.hour))


def make_input_window(manifest, index, t_in):
    """Inputs only (no targets) for prediction from the observed history
    ending at `index`: returns (x, dem, timestamp)."""
    if t_in < 1:
        raise ConfigError(f"window needs t_in >= 1, got {t_in}")
    if not _window_ok(manifest, index, t_in, 0):
        raise WindowError(
            f"no contiguous {t_in}-frame history ending at record {index}")
    xs = []
    for i in range(index - t_in + 1, index + 1):
        stack, _, _ = _norm_sat_stack(manifest, i)
        xs.append(stack)
    rec = manifest.records[index]
    return (Tensor(np.stack(xs, axis=0)), load_dem(manifest),
            TimeStamp(day=rec.day_of_year, hour=rec.hour))


def load_sat_radar_pair(manifest, index):
    """One aligned (satellite [C, H, W], radar [1, H, W]) pair, normalized."""
    stack, frame, rec = _norm_sat_stack(manifest, index)
    radar = normalize(frame[RADAR_CHANNEL], manifest.bounds[RADAR_CHANNEL])
    return stack, radar[None]


def random_crop(batch, size, rng):
    """Crop every frame and the DEM of a ForecastBatch to size x size with
    one shared window."""
    h, w = batch.x.shape[2], batch.x.shape[3]
    if size > h or size > w:
        raise ShapeError(f"crop {size} exceeds grid {h}x{w}")
    i = int(rng.integers(0, h - size + 1))
    j = int(rng.integers(0, w - size + 1))
    return ForecastBatch(
        x=Tensor(np.ascontiguousarray(batch.x.data[:, :, i:i + size, j:j + size])),
        y=Tensor(np.ascontiguousarray(batch.y.data[:, :, i:i + size, j:j + size])),
        dem=Tensor(np.ascontiguousarray(batch.dem.data[:, i:i + size, j:j + size])),
        timestamp=batch.timestamp)
