"""Command-line interface.

Subcommands: gen-data, train-stage1, train-stage2, predict, evaluate,
counterfactual. Configuration precedence is defaults < --config file <
explicit flags; every run writes a resolved-config snapshot next to its
outputs. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import os
import sys
from dataclasses import fields as dc_fields
from datetime import datetime

import numpy as np

from . import kernels
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (Manifest, SeasonAwareSampler, WindowError, load_dem,
                   load_frame_record, load_sat_radar_pair, make_input_window,
                   make_window, random_crop, write_frame)
from .embedding import TimeStamp
from .metrics import ScoreBreakdown, csi, evaluate_run
from .model_stage1 import (NpmConfig, NpmModel, TrainingError, counterfactual_day,
                           make_optimizer, rollout, train_step)
from .model_stage2 import (S2rBatch, S2rConfig, S2rDiscriminator, S2rGenerator,
                           attach_dem, make_s2r_optimizers, pipeline_predict,
                           s2r_train_step, translate_frames)
from .optim import cosine_lr
from .synthetic import SynthConfig, generate_dataset
from .tensor import ConfigError, Tensor


class UsageError(ValueError):
    """Bad flag combination or unusable inputs; maps to exit code 2."""


# ---------------------------------------------------------------- plumbing

def _parse_config_file(path):
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise UsageError(f"{path}:{ln}: expected 'key value'")
            out[parts[0]] = parts[1].strip()
    return out


def _coerce(value, target_type):
    if target_type is bool:
        if isinstance(value, bool):
            return value
        low = str(value).lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"cannot read {value!r} as a boolean")
    return target_type(value)


def _build_dataclass(cls, file_cfg, flag_values):
    """Resolve a config dataclass: defaults, then file entries, then flags."""
    kwargs = {}
    types = {f.name: f.type for f in dc_fields(cls)}
    for name, ftype in types.items():
        pytype = {"int": int, "float": float, "bool": bool, "str": str}.get(
            ftype, None)
        if pytype is None:
            pytype = ftype if isinstance(ftype, type) else str
        if name in file_cfg:
            kwargs[name] = _coerce(file_cfg[name], pytype)
        if name in flag_values and flag_values[name] is not None:
            kwargs[name] = _coerce(flag_values[name], pytype)
    unknown = set(file_cfg) - set(types)
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)} for "
                         f"{cls.__name__}")
    return cls(**kwargs)


def _write_kv(path, pairs):
    with open(path, "w") as fh:
        for k, v in pairs:
            fh.write(f"{k} {v}\n")


def _snapshot(out_dir, command, resolved):
    rows = [("command", command)]
    rows += sorted(resolved.items())
    _write_kv(os.path.join(out_dir, "run_config.txt"), rows)


def _prepare_out(path, force):
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise UsageError(
            f"output directory {path!r} is not empty (use --force)")
    os.makedirs(path, exist_ok=True)


def write_pgm(path, rate, comment="rain rate mm/h"):
    """8-bit grayscale quicklook: gray = round(255 * min(rate, 16) / 16)."""
    arr = np.asarray(rate, dtype=np.float64)
    gray = np.round(255.0 * np.minimum(arr, 16.0) / 16.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# {comment}; gray = round(255*min(v,16)/16)\n".encode())
        fh.write(f"{gray.shape[1]} {gray.shape[0]}\n255\n".encode())
        fh.write(gray.tobytes())


def write_pgm_unit(path, values, comment="normalized field"):
    """Quicklook for [0, 1] fields: gray = round(255 * clip(v, 0, 1))."""
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    gray = np.round(255.0 * arr).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        fh.write(f"# {comment}; gray = round(255*clip(v,0,1))\n".encode())
        fh.write(f"{gray.shape[1]} {gray.shape[0]}\n255\n".encode())
        fh.write(gray.tobytes())


def _find_record(manifest, iso):
    for i, rec in enumerate(manifest.records):
        if rec.iso == iso:
            return i
    target = datetime.fromisoformat(iso)
    dists = sorted(
        (abs((datetime.fromisoformat(r.iso) - target).total_seconds()), r.iso)
        for r in manifest.records)[:3]
    near = ", ".join(iso_ for _, iso_ in dists)
    raise UsageError(f"timestamp {iso!r} not in manifest; nearest: {near}")


def _timestamp_of_iso(iso):
    dt = datetime.fromisoformat(iso)
    return TimeStamp(day=dt.timetuple().tm_yday - 1, hour=dt.hour)


def _save_stage1(out_dir, model, opt, name="checkpoint.npmckpt"):
    arrays = dict(model.store.to_arrays())
    arrays.update(opt.state_arrays("opt."))
    path = os.path.join(out_dir, name)
    save_checkpoint(path, arrays)
    _write_kv(os.path.join(out_dir, "config.txt"),
              sorted(model.config.to_dict().items()))
    return path


def _load_stage1(run_dir):
    cfg = _build_dataclass(
        NpmConfig, _parse_config_file(os.path.join(run_dir, "config.txt")), {})
    model = NpmModel(cfg, seed=0)
    arrays = load_checkpoint(os.path.join(run_dir, "checkpoint.npmckpt"))
    model.store.load_arrays(
        {k: v for k, v in arrays.items() if k.startswith("stage1.")})
    return model, arrays


def _save_stage2(out_dir, gen, disc, opt_g, opt_d, name="checkpoint.npmckpt"):
    arrays = dict(gen.store.to_arrays())
    arrays.update(disc.store.to_arrays())
    arrays.update(opt_g.state_arrays("optg."))
    arrays.update(opt_d.state_arrays("optd."))
    path = os.path.join(out_dir, name)
    save_checkpoint(path, arrays)
    _write_kv(os.path.join(out_dir, "config.txt"),
              sorted(gen.config.to_dict().items()))
    return path


def _load_stage2(run_dir):
    cfg = _build_dataclass(
        S2rConfig, _parse_config_file(os.path.join(run_dir, "config.txt")), {})
    gen = S2rGenerator(cfg, seed=0)
    disc = S2rDiscriminator(cfg, seed=0)
    arrays = load_checkpoint(os.path.join(run_dir, "checkpoint.npmckpt"))
    gen.store.load_arrays(
        {k: v for k, v in arrays.items() if k.startswith("gen.")})
    disc.store.load_arrays(
        {k: v for k, v in arrays.items() if k.startswith("disc.")})
    return gen, disc, arrays


def _make_sampler(manifest, t_in, t_out, split="train"):
    """Season-aware sampler weighting only the months the split covers."""
    present = {r.month for r in manifest.records if r.split == split}
    if not present:
        raise UsageError(f"manifest has no {split!r} records")
    weights = {m: (1.0 if m in present else 0.0) for m in range(1, 13)}
    return SeasonAwareSampler(manifest, t_in, t_out, split, weights)


def _run_manifest(out_dir, command, seed, extra):
    rows = [("command", command), ("seed", seed),
            ("kernel_backend", kernels.BACKEND),
            ("optimizer", "adamw(beta1=0.9,beta2=0.999,eps=1e-8)"),
            ("schedule", "cosine")]
    rows += list(extra)
    _write_kv(os.path.join(out_dir, "run_manifest.txt"), rows)


# ------------------------------------------------------------- subcommands

def cmd_gen_data(args):
    file_cfg = _parse_config_file(args.config) if args.config else {}
    flag_values = {"grid": args.grid, "seed": args.seed, "noise": args.noise,
                   "start_iso": args.start}
    if args.years is not None:
        flag_values["n_hours"] = 24 * 365 * args.years
    cfg = _build_dataclass(SynthConfig, file_cfg, flag_values)
    _prepare_out(args.out, args.force)
    manifest = generate_dataset(cfg, args.out)
    _snapshot(args.out, "gen-data", cfg.to_dict())
    n_train = sum(1 for r in manifest.records if r.split == "train")
    n_test = len(manifest.records) - n_train
    print(f"wrote {len(manifest.records)} records "
          f"({n_train} train, {n_test} test) under {args.out}")
    print(f"manifest: {os.path.join(args.out, 'manifest.txt')}")
    return 0


def _stage1_flag_values(args):
    return {k: getattr(args, k) for k in (
        "t_in", "t_out", "enc_dec_stages", "st_blocks", "enc_channels",
        "st_channels", "k_spatial_dw", "k_spatial_dwd", "spatial_dilation",
        "k_temporal", "mlp_ratio", "alpha", "lr", "min_lr", "total_steps",
        "crop", "use_embedding") if getattr(args, k, None) is not None}


def cmd_train_stage1(args):
    manifest = Manifest.load(args.manifest)
    file_cfg = _parse_config_file(args.config) if args.config else {}
    flag_values = _stage1_flag_values(args)
    if "total_steps" not in flag_values and "total_steps" not in file_cfg:
        flag_values["total_steps"] = args.steps
    if "crop" not in flag_values and "crop" not in file_cfg:
        probe = _build_dataclass(NpmConfig, file_cfg, flag_values)
        div = 2 ** probe.enc_dec_stages
        crop = min(probe.crop, manifest.grid[0], manifest.grid[1])
        crop -= crop % div
        if crop < div:
            raise UsageError(
                f"grid {manifest.grid} too small for {probe.enc_dec_stages} "
                f"encoder stages; pass --crop or --enc-dec-stages")
        flag_values["crop"] = crop
    cfg = _build_dataclass(NpmConfig, file_cfg, flag_values)
    _prepare_out(args.out, args.force)
    model = NpmModel(cfg, seed=args.seed)
    opt = make_optimizer(model)
    if args.resume:
        arrays = load_checkpoint(args.resume)
        model.store.load_arrays(
            {k: v for k, v in arrays.items() if k.startswith("stage1.")})
        opt.load_state_arrays(arrays, "opt.")
    sampler = _make_sampler(manifest, cfg.t_in, cfg.t_out)
    rng = np.random.default_rng(args.seed)
    _snapshot(args.out, "train-stage1",
              dict(cfg.to_dict(), seed=args.seed, steps=args.steps,
                   manifest=os.path.abspath(args.manifest)))
    _run_manifest(args.out, "train-stage1", args.seed,
                  [("steps", args.steps), ("params", model.store.n_params)])
    log_path = os.path.join(args.out, "log.csv")
    with open(log_path, "a" if args.resume else "w") as log:
        if not args.resume:
            log.write("step,lr,mse,reg,total\n")
        for _ in range(args.steps):
            idx = sampler.sample(rng)
            batch = make_window(manifest, idx, cfg.t_in, cfg.t_out)
            if cfg.crop < min(batch.x.shape[2], batch.x.shape[3]):
                batch = random_crop(batch, cfg.crop, rng)
            report, lr = train_step(model, batch, opt)
            log.write(f"{opt.t},{lr:.8g},{report.mse:.8g},"
                      f"{report.reg:.8g},{report.total:.8g}\n")
            if args.ckpt_every and opt.t % args.ckpt_every == 0:
                _save_stage1(args.out, model, opt,
                             name=f"checkpoint_step{opt.t:06d}.npmckpt")
            if args.log_every and opt.t % args.log_every == 0:
                print(f"step {opt.t}: total={report.total:.6f} "
                      f"mse={report.mse:.6f} reg={report.reg:.6f} lr={lr:.3g}")
    path = _save_stage1(args.out, model, opt)
    print(f"final checkpoint: {path}")
    return 0


def cmd_train_stage2(args):
    manifest = Manifest.load(args.manifest)
    file_cfg = _parse_config_file(args.config) if args.config else {}
    flag_values = {k: getattr(args, k) for k in (
        "base_width", "depth", "disc_width", "disc_depth", "lam", "lr",
        "min_lr", "total_steps") if getattr(args, k, None) is not None}
    if "total_steps" not in flag_values and "total_steps" not in file_cfg:
        flag_values["total_steps"] = args.steps
    cfg = _build_dataclass(S2rConfig, file_cfg, flag_values)
    _prepare_out(args.out, args.force)
    gen = S2rGenerator(cfg, seed=args.seed)
    disc = S2rDiscriminator(cfg, seed=args.seed)
    opt_g, opt_d = make_s2r_optimizers(gen, disc)
    if args.resume:
        arrays = load_checkpoint(args.resume)
        gen.store.load_arrays(
            {k: v for k, v in arrays.items() if k.startswith("gen.")})
        disc.store.load_arrays(
            {k: v for k, v in arrays.items() if k.startswith("disc.")})
        opt_g.load_state_arrays(arrays, "optg.")
        opt_d.load_state_arrays(arrays, "optd.")
    sampler = _make_sampler(manifest, 1, 0)
    rng = np.random.default_rng(args.seed)
    dem = load_dem(manifest)
    _snapshot(args.out, "train-stage2",
              dict(cfg.to_dict(), seed=args.seed, steps=args.steps,
                   batch=args.batch, manifest=os.path.abspath(args.manifest)))
    _run_manifest(args.out, "train-stage2", args.seed,
                  [("steps", args.steps), ("batch", args.batch),
                   ("gen_params", gen.store.n_params),
                   ("disc_params", disc.store.n_params)])
    log_path = os.path.join(args.out, "log.csv")
    with open(log_path, "a" if args.resume else "w") as log:
        if not args.resume:
            log.write("step,lr,mse,adv,total,d_loss\n")
        for _ in range(args.steps):
            sats, radars = [], []
            for _ in range(args.batch):
                idx = sampler.sample(rng)
                sat, radar = load_sat_radar_pair(manifest, idx)
                sats.append(sat)
                radars.append(radar)
            sat_t = Tensor(np.stack(sats))
            if cfg.use_dem:
                sat_t = attach_dem(sat_t, dem)
            batch = S2rBatch(sat=sat_t, radar=Tensor(np.stack(radars)))
            lr = cosine_lr(opt_g.t, cfg.total_steps, cfg.lr, cfg.min_lr)
            report, d_loss = s2r_train_step(gen, disc, batch, opt_g, opt_d)
            log.write(f"{opt_g.t},{lr:.8g},{report.mse:.8g},"
                      f"{report.adversarial:.8g},{report.total:.8g},"
                      f"{d_loss:.8g}\n")
            if args.log_every and opt_g.t % args.log_every == 0:
                print(f"step {opt_g.t}: mse={report.mse:.6f} "
                      f"adv={report.adversarial:.4f} d={d_loss:.4f}")
            if args.ckpt_every and opt_g.t % args.ckpt_every == 0:
                _save_stage2(args.out, gen, disc, opt_g, opt_d,
                             name=f"checkpoint_step{opt_g.t:06d}.npmckpt")
    path = _save_stage2(args.out, gen, disc, opt_g, opt_d)
    print(f"final checkpoint: {path}")
    return 0


def cmd_predict(args):
    manifest = Manifest.load(args.manifest)
    model, _ = _load_stage1(args.stage1)
    gen, _, _ = _load_stage2(args.stage2)
    _prepare_out(args.out, args.force)
    index = _find_record(manifest, args.timestamp)
    try:
        x, dem, ts = make_input_window(manifest, index, model.config.t_in)
    except WindowError as e:
        raise UsageError(str(e))
    horizon = args.horizon or model.config.t_out
    if horizon <= model.config.t_out:
        preds = pipeline_predict(model, gen, x, dem, ts)[:horizon]
    else:
        frames = rollout(model, x, dem, ts, horizon)
        preds = translate_frames(gen, frames, dem)
    _snapshot(args.out, "predict",
              {"timestamp": args.timestamp, "horizon": horizon,
               "stage1": os.path.abspath(args.stage1),
               "stage2": os.path.abspath(args.stage2)})
    for pred in preds:
        rate = pred.values.data
        base = os.path.join(args.out, f"pred_lead{pred.lead_hours:02d}")
        write_frame(base + ".npmfrm", rate, ["RRATEPRD"])
        write_pgm(base + ".pgm", rate[0],
                  comment=f"predicted rain, lead {pred.lead_hours} h")
    print(f"wrote {len(preds)} predicted frames under {args.out}")
    return 0


def cmd_evaluate(args):
    manifest = Manifest.load(args.manifest)
    model, _ = _load_stage1(args.stage1)
    gen, _, _ = _load_stage2(args.stage2)
    _prepare_out(args.out, args.force)
    thresholds = tuple(float(v) for v in args.thresholds.split(","))
    t_in, t_out = model.config.t_in, model.config.t_out
    test_idx = [i for i, r in enumerate(manifest.records) if r.split == "test"]
    if not test_idx:
        raise UsageError("manifest has no test records")
    items = []
    observations = {}
    n_windows = 0
    for i in test_idx[::max(1, args.stride)]:
        try:
            batch = make_window(manifest, i, t_in, t_out)
        except WindowError:
            continue
        if args.oracle_input:
            preds = translate_frames(gen, batch.y, batch.dem)
        else:
            preds = pipeline_predict(model, gen, batch.x, batch.dem,
                                     batch.timestamp)
        for pred in preds:
            vi = i + pred.lead_hours
            rec = manifest.records[vi]
            if vi not in observations:
                frame, _ = load_frame_record(manifest, vi)
                observations[vi] = frame["RRATE"]
            lead_h = pred.lead_hours * manifest.interval_hours
            items.append((vi, rec.month, lead_h, pred.values.data[0]))
        n_windows += 1
        if args.max_windows and n_windows >= args.max_windows:
            break
    if not items:
        raise UsageError("no evaluable windows in the test split")
    breakdown, skipped = evaluate_run(items, observations, thresholds)
    breakdown.save_csv(os.path.join(args.out, "metrics.csv"))
    by_month = ScoreBreakdown()
    for (thr, lead, month), table in breakdown.cells.items():
        by_month.add(thr, 0, month, table)
    by_month.save_csv(os.path.join(args.out, "summary_by_month.csv"))
    _snapshot(args.out, "evaluate",
              {"thresholds": args.thresholds, "stride": args.stride,
               "windows": n_windows, "oracle_input": bool(args.oracle_input),
               "skipped": len(skipped)})
    for thr in thresholds:
        pooled = breakdown.pooled(threshold=thr)
        val = csi(pooled)
        print(f"CSI {thr:g} mm (all leads/months): "
              f"{'undefined' if val is None else f'{val:.4f}'}")
    print(f"evaluated {n_windows} windows; "
          f"metrics: {os.path.join(args.out, 'metrics.csv')}")
    return 0


def cmd_counterfactual(args):
    manifest = Manifest.load(args.manifest)
    model, _ = _load_stage1(args.stage1)
    _prepare_out(args.out, args.force)
    index = _find_record(manifest, args.timestamp)
    try:
        x, dem, ts = make_input_window(manifest, index, model.config.t_in)
    except WindowError as e:
        raise UsageError(str(e))
    alt = _timestamp_of_iso(args.alt_timestamp)
    base, swapped = counterfactual_day(model, x, dem, ts, alt)
    rows = ["lead_h,mad"]
    for i in range(base.shape[0]):
        mad = float(np.abs(base.data[i] - swapped.data[i]).mean())
        rows.append(f"{i + 1},{mad!r}")
        write_pgm_unit(os.path.join(args.out, f"base_lead{i + 1:02d}.pgm"),
                       base.data[i, 0], comment="IR-channel forecast, base date")
        write_pgm_unit(os.path.join(args.out, f"alt_lead{i + 1:02d}.pgm"),
                       swapped.data[i, 0], comment="IR-channel forecast, alt date")
    with open(os.path.join(args.out, "difference.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    _snapshot(args.out, "counterfactual",
              {"timestamp": args.timestamp,
               "alt_timestamp": args.alt_timestamp,
               "stage1": os.path.abspath(args.stage1)})
    print(f"wrote {2 * base.shape[0]} quicklooks and difference.csv "
          f"under {args.out}")
    return 0


# ------------------------------------------------------------------ parser

def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key value config file (flags override)")
    p.add_argument("--force", action="store_true",
                   help="allow writing into a non-empty output directory")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="npmcast",
        description="Two-stage satellite-based precipitation nowcasting.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--years", type=int, help="365-day years to generate")
    p.add_argument("--start", default=None, help="ISO start timestamp")
    p.add_argument("--noise", action="store_const", const=True, default=None)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-stage1", help="train the satellite forecaster")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--ckpt-every", type=int, default=0)
    for flag, typ in (("--t-in", int), ("--t-out", int),
                      ("--enc-dec-stages", int), ("--st-blocks", int),
                      ("--enc-channels", int), ("--st-channels", int),
                      ("--k-spatial-dw", int), ("--k-spatial-dwd", int),
                      ("--spatial-dilation", int), ("--k-temporal", int),
                      ("--mlp-ratio", float), ("--alpha", float),
                      ("--lr", float), ("--min-lr", float),
                      ("--total-steps", int), ("--crop", int)):
        p.add_argument(flag, type=typ)
    p.add_argument("--no-embedding", action="store_const", const=False,
                   dest="use_embedding", default=None,
                   help="drop the day/hour condition (ablation)")
    p.set_defaults(fn=cmd_train_stage1)

    p = sub.add_parser("train-stage2", help="train the radar translator")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--resume")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--ckpt-every", type=int, default=0)
    p.add_argument("--lambda", "--lam", type=float, dest="lam",
                   help="adversarial loss weight")
    for flag, typ in (("--base-width", int), ("--depth", int),
                      ("--disc-width", int), ("--disc-depth", int),
                      ("--lr", float), ("--min-lr", float),
                      ("--total-steps", int)):
        p.add_argument(flag, type=typ)
    p.set_defaults(fn=cmd_train_stage2)

    p = sub.add_parser("predict", help="forecast radar frames from a window")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stage1", required=True, help="train-stage1 output dir")
    p.add_argument("--stage2", required=True, help="train-stage2 output dir")
    p.add_argument("--timestamp", required=True, help="ISO last-input time")
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="score the pipeline on the test split")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stage1", required=True)
    p.add_argument("--stage2", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--thresholds", default="1,4,8")
    p.add_argument("--stride", type=int, default=6,
                   help="evaluate every k-th test record")
    p.add_argument("--max-windows", type=int, default=0)
    p.add_argument("--oracle-input", action="store_true",
                   help="feed ground-truth future satellite frames to stage 2")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("counterfactual",
                       help="same input, two calendar conditions")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--stage1", required=True)
    p.add_argument("--timestamp", required=True)
    p.add_argument("--alt-timestamp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_counterfactual)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, TrainingError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
