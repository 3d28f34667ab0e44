"""Deterministic synthetic dataset with seasonal and diurnal structure.

Cloud cover is a sum of Gaussian blobs advected by a wind whose direction
rotates with day-of-year (theta = 2*pi*day/365) and whose displacement is
accumulated once into a prefix table, so every frame is a closed-form
function of (config, timestep). Blob depth is modulated by a seasonal
sinusoid peaking at a configured day and a diurnal bump peaking at a
configured hour; the bump's time symmetry means two different hours can
show identical input brightness histories with different continuations,
which is what makes the calendar condition informative to a forecaster.
A small scene-level position jitter (per-timestep RNG stream derived from
(seed, timestep)) keeps frame-to-frame motion estimates noisy without
breaking determinism.

Channels: IR105 is clear-sky brightness minus cloud depth; WV063 is an
analytically blurred variant (Gaussian widths add in quadrature); WV073 is
blurred and shifted along the wind; RRATE comes from the analytic rain law
rate = c * max(0, T_thresh - Tb)^p applied to the stored IR frame, so the
satellite-to-radar map has an exact learnable ceiling. Terrain is a fixed
random smooth field.
"""

import os
from dataclasses import dataclass, asdict
from datetime import datetime, timedelta

import numpy as np

from .data import (FrameRecord, Manifest, RADAR_CHANNEL, SAT_CHANNELS,
                   write_frame)
from .tensor import ConfigError

IR_CLEAR = 295.0
IR_GAIN = 70.0
WV063_CLEAR, WV063_GAIN, WV063_BLUR = 255.0, 40.0, 2.0
WV073_CLEAR, WV073_GAIN, WV073_BLUR, WV073_LAG = 262.0, 45.0, 1.0, 2.0
BOUNDS = {"IR105": (190.0, 310.0), "WV063": (180.0, 280.0),
          "WV073": (180.0, 280.0), "RRATE": (0.0, 100.0)}


@dataclass
class SynthConfig:
    grid: int = 64
    start_iso: str = "2024-01-01T00:00:00"
    n_hours: int = 17520
    interval_hours: int = 1
    blob_min: int = 5
    blob_max: int = 9
    seasonal_peak_day: int = 200
    seasonal_depth: float = 0.45
    diurnal_peak_hour: float = 15.0
    diurnal_width: float = 3.5
    wind_speed: float = 1.5
    jitter_px: float = 0.75
    rain_thresh: float = 255.0
    rain_c: float = 0.05
    rain_p: float = 1.6
    noise: bool = False
    noise_sigma: float = 0.5
    test_from_year: int = 0
    seed: int = 0

    def validate(self):
        if self.grid < 8:
            raise ConfigError(f"grid must be >= 8, got {self.grid}")
        if self.n_hours < 1 or self.interval_hours < 1:
            raise ConfigError("n_hours and interval_hours must be >= 1")
        if not (1 <= self.blob_min <= self.blob_max):
            raise ConfigError("need 1 <= blob_min <= blob_max")
        if not 0.0 <= self.seasonal_depth < 1.0:
            raise ConfigError(
                f"seasonal_depth must be in [0, 1), got {self.seasonal_depth}")
        if self.rain_p <= 0:
            raise ConfigError(f"rain exponent must be > 0, got {self.rain_p}")
        lo, hi = BOUNDS["IR105"]
        if not lo <= self.rain_thresh <= hi:
            raise ConfigError(
                f"rain_thresh {self.rain_thresh} outside IR bounds {lo}..{hi}")
        if self.diurnal_width <= 0 or self.wind_speed < 0 or self.jitter_px < 0:
            raise ConfigError("diurnal_width must be > 0; speeds must be >= 0")

    def to_dict(self):
        return asdict(self)


def sat_to_radar_oracle(ir, cfg):
    """Analytic rain law, exactly the rule used by generate_dataset."""
    ir = np.asarray(ir, dtype=np.float64)
    rate = cfg.rain_c * np.maximum(0.0, cfg.rain_thresh - ir) ** cfg.rain_p
    return rate.astype(np.float32)


def _season_factor(day, cfg):
    phase = 2.0 * np.pi * (day - cfg.seasonal_peak_day) / 365.0
    return (1.0 - cfg.seasonal_depth) + cfg.seasonal_depth * 0.5 * (1.0 + np.cos(phase))


def _diurnal_factor(hour, cfg):
    dh = abs(float(hour) - cfg.diurnal_peak_hour)
    dh = min(dh, 24.0 - dh)
    return 0.5 + 0.5 * np.exp(-dh * dh / (2.0 * cfg.diurnal_width ** 2))


def _wind_direction(day):
    theta = 2.0 * np.pi * day / 365.0
    return np.array([np.cos(theta), np.sin(theta)])


@dataclass(frozen=True)
class _Scene:
    pos0: np.ndarray
    sigma: np.ndarray
    depth: np.ndarray
    speed: np.ndarray


def _make_scene(cfg):
    rng = np.random.default_rng([cfg.seed, 0xB10B])
    k = int(rng.integers(cfg.blob_min, cfg.blob_max + 1))
    return _Scene(
        pos0=rng.uniform(0.0, cfg.grid, size=(k, 2)),
        sigma=rng.uniform(cfg.grid / 16.0, cfg.grid / 8.0, size=k),
        depth=rng.uniform(0.8, 1.4, size=k),
        speed=rng.uniform(0.7, 1.3, size=k))


def _displacement_table(cfg, days):
    """Cumulative advection displacement before each timestep."""
    steps = np.stack([_wind_direction(d) for d in days]) * \
        (cfg.wind_speed * cfg.interval_hours)
    table = np.zeros((len(days), 2))
    table[1:] = np.cumsum(steps[:-1], axis=0)
    return table


def _blob_field(cfg, scene, positions, amp, extra_blur=0.0, shift=None):
    """Sum of toroidal Gaussians, evaluated separably per axis."""
    n = cfg.grid
    coords = np.arange(n, dtype=np.float64)
    field = np.zeros((n, n))
    for b in range(len(scene.sigma)):
        p = positions[b]
        if shift is not None:
            p = p + shift
        var = scene.sigma[b] ** 2 + extra_blur ** 2
        dy = np.mod(coords - p[0] + n / 2.0, n) - n / 2.0
        dx = np.mod(coords - p[1] + n / 2.0, n) - n / 2.0
        gy = np.exp(-dy * dy / (2.0 * var))
        gx = np.exp(-dx * dx / (2.0 * var))
        field += (amp * scene.depth[b]) * np.outer(gy, gx)
    return field


def render_timestep(cfg, scene, disp, day, hour, t):
    """All four channels for one timestep as {tag: [H, W] float32}."""
    jitter = np.zeros(2)
    if cfg.jitter_px > 0:
        jitter = np.random.default_rng([cfg.seed, 1, t]).normal(
            0.0, cfg.jitter_px, size=2)
    positions = np.mod(scene.pos0 + scene.speed[:, None] * disp + jitter,
                       cfg.grid)
    amp = _season_factor(day, cfg) * _diurnal_factor(hour, cfg)
    depth = _blob_field(cfg, scene, positions, amp)
    depth_b = _blob_field(cfg, scene, positions, amp, extra_blur=WV063_BLUR)
    lag = -WV073_LAG * _wind_direction(day)
    depth_s = _blob_field(cfg, scene, positions, amp,
                          extra_blur=WV073_BLUR, shift=lag)

    ir = np.clip(IR_CLEAR - IR_GAIN * depth, *BOUNDS["IR105"])
    wv063 = np.clip(WV063_CLEAR - WV063_GAIN * depth_b, *BOUNDS["WV063"])
    wv073 = np.clip(WV073_CLEAR - WV073_GAIN * depth_s, *BOUNDS["WV073"])
    if cfg.noise:
        nrng = np.random.default_rng([cfg.seed, 2, t])
        ir = np.clip(ir + nrng.normal(0, cfg.noise_sigma, ir.shape),
                     *BOUNDS["IR105"])
        wv063 = np.clip(wv063 + nrng.normal(0, cfg.noise_sigma, ir.shape),
                        *BOUNDS["WV063"])
        wv073 = np.clip(wv073 + nrng.normal(0, cfg.noise_sigma, ir.shape),
                        *BOUNDS["WV073"])
    ir = ir.astype(np.float32)
    rate = np.clip(sat_to_radar_oracle(ir, cfg), *BOUNDS["RRATE"])
    return {"IR105": ir, "WV063": wv063.astype(np.float32),
            "WV073": wv073.astype(np.float32), "RRATE": rate}


def _make_dem(cfg):
    rng = np.random.default_rng([cfg.seed, 0xDE])
    n = cfg.grid
    coords = np.arange(n, dtype=np.float64)
    field = np.zeros((n, n))
    for _ in range(6):
        cy, cx = rng.uniform(0, n, size=2)
        s = rng.uniform(n / 10.0, n / 4.0)
        a = rng.uniform(100.0, 800.0)
        dy = np.mod(coords - cy + n / 2.0, n) - n / 2.0
        dx = np.mod(coords - cx + n / 2.0, n) - n / 2.0
        field += a * np.outer(np.exp(-dy * dy / (2 * s * s)),
                              np.exp(-dx * dx / (2 * s * s)))
    return field.astype(np.float32)


def generate_dataset(cfg, out_dir):
    """Write frames, terrain, and manifest under out_dir; returns the
    Manifest. The last calendar year in range becomes the test split unless
    test_from_year overrides it (0 means auto)."""
    cfg.validate()
    frames_dir = os.path.join(out_dir, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    start = datetime.fromisoformat(cfg.start_iso)
    stamps = [start + timedelta(hours=t * cfg.interval_hours)
              for t in range(cfg.n_hours)]
    days = [dt.timetuple().tm_yday - 1 for dt in stamps]
    years = sorted({dt.year for dt in stamps})
    test_from = cfg.test_from_year
    if test_from == 0:
        test_from = years[-1] if len(years) > 1 else years[-1] + 1

    scene = _make_scene(cfg)
    disp = _displacement_table(cfg, days)
    write_frame(os.path.join(out_dir, "dem.npmfrm"), _make_dem(cfg)[None],
                ["DEM"])

    channels = tuple(SAT_CHANNELS) + (RADAR_CHANNEL,)
    records = []
    for t, dt in enumerate(stamps):
        fields = render_timestep(cfg, scene, disp[t], days[t], dt.hour, t)
        stack = np.stack([fields[name] for name in channels])
        rel = os.path.join("frames", f"{t:06d}.npmfrm")
        write_frame(os.path.join(out_dir, rel), stack, list(channels))
        records.append(FrameRecord(
            iso=dt.isoformat(), year=dt.year, month=dt.month,
            day_of_year=days[t], hour=dt.hour, path=rel,
            split="test" if dt.year >= test_from else "train"))

    manifest = Manifest(grid=(cfg.grid, cfg.grid),
                        interval_hours=cfg.interval_hours,
                        channels=channels,
                        bounds={name: BOUNDS[name] for name in channels},
                        dem_path="dem.npmfrm", records=records, root=out_dir)
    manifest.validate()
    manifest.save(os.path.join(out_dir, "manifest.txt"))
    return manifest
