"""End-to-end command-line workflow on a tiny dataset: generation, both
training stages, prediction, evaluation, counterfactuals, resume, config
precedence, and exit codes."""

import subprocess
import sys

import numpy as np
import pytest

from npmcast.checkpoint import load_checkpoint
from npmcast.cli import _load_stage1, main
from npmcast.data import Manifest, read_frame
from npmcast.metrics import ScoreBreakdown
from npmcast.optim import cosine_lr

S1_FLAGS = ["--t-in", "2", "--t-out", "2", "--enc-dec-stages", "1",
            "--st-blocks", "1", "--enc-channels", "8", "--st-channels", "12",
            "--k-spatial-dw", "3", "--k-spatial-dwd", "3",
            "--spatial-dilation", "1", "--k-temporal", "3",
            "--mlp-ratio", "2", "--crop", "16", "--lr", "1e-3"]
S2_FLAGS = ["--base-width", "8", "--depth", "1", "--disc-width", "8",
            "--disc-depth", "1", "--lr", "1e-3"]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Generate 10 days of data spanning a year boundary, train both stages
    briefly, and hand the paths to every test in this module."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    cfgfile = root / "synth.cfg"
    cfgfile.write_text("grid 16\nn_hours 240\nstart_iso 2024-12-29T00:00:00\n")
    assert main(["gen-data", "--out", str(data), "--config", str(cfgfile),
                 "--seed", "1"]) == 0
    s1 = root / "s1"
    assert main(["train-stage1", "--manifest", str(data / "manifest.txt"),
                 "--out", str(s1), "--steps", "4"] + S1_FLAGS) == 0
    s2 = root / "s2"
    assert main(["train-stage2", "--manifest", str(data / "manifest.txt"),
                 "--out", str(s2), "--steps", "3", "--batch", "2"]
                + S2_FLAGS) == 0
    return {"root": root, "data": data, "manifest": str(data / "manifest.txt"),
            "s1": s1, "s2": s2}


def test_gen_data_outputs(runs):
    m = Manifest.load(runs["data"] / "manifest.txt")
    assert len(m.records) == 240
    n_train = sum(1 for r in m.records if r.split == "train")
    assert n_train == 72  # 2024-12-29..31; the 2025 tail is the test year
    snapshot = (runs["data"] / "run_config.txt").read_text()
    assert "grid 16" in snapshot
    assert "n_hours 240" in snapshot


def test_stage1_artifacts(runs):
    s1 = runs["s1"]
    assert (s1 / "checkpoint.npmckpt").exists()
    cfg_text = (s1 / "config.txt").read_text()
    assert "t_in 2" in cfg_text
    assert "use_embedding True" in cfg_text
    lines = (s1 / "log.csv").read_text().strip().splitlines()
    assert lines[0] == "step,lr,mse,reg,total"
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[1]) == pytest.approx(cosine_lr(0, 4, 1e-3, 1e-6))
    run_manifest = (s1 / "run_manifest.txt").read_text()
    assert "kernel_backend" in run_manifest
    assert "schedule cosine" in run_manifest
    arrays = load_checkpoint(s1 / "checkpoint.npmckpt")
    assert any(k.startswith("stage1.") for k in arrays)
    assert "opt.step" in arrays or any(k.startswith("opt.") for k in arrays)


def test_stage2_artifacts(runs):
    s2 = runs["s2"]
    lines = (s2 / "log.csv").read_text().strip().splitlines()
    assert lines[0] == "step,lr,mse,adv,total,d_loss"
    assert len(lines) == 1 + 3
    d0 = float(lines[1].split(",")[-1])
    assert abs(d0 - 2.0 * np.log(2.0)) < 0.3
    arrays = load_checkpoint(s2 / "checkpoint.npmckpt")
    prefixes = {k.split(".")[0] for k in arrays}
    assert {"gen", "disc", "optg", "optd"} <= prefixes


def test_predict_writes_frames_and_quicklooks(runs, tmp_path):
    out = tmp_path / "pred"
    rc = main(["predict", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--timestamp", "2025-01-05T06:00:00", "--out", str(out)])
    assert rc == 0
    data, tags = read_frame(out / "pred_lead01.npmfrm")
    assert tags == ("RRATEPRD",)
    assert data.shape == (1, 16, 16)
    assert float(data.min()) >= 0.0
    pgm = (out / "pred_lead01.pgm").read_bytes()
    assert pgm.startswith(b"P5\n")
    assert b"16 16\n255\n" in pgm
    assert (out / "pred_lead02.npmfrm").exists()
    assert not (out / "pred_lead03.npmfrm").exists()


def test_predict_long_horizon_rolls_out(runs, tmp_path):
    out = tmp_path / "pred"
    rc = main(["predict", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--timestamp", "2025-01-05T06:00:00", "--out", str(out),
               "--horizon", "5"])
    assert rc == 0
    assert (out / "pred_lead05.npmfrm").exists()


def test_predict_unknown_timestamp_is_usage_error(runs, tmp_path, capsys):
    rc = main(["predict", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--timestamp", "2030-01-01T00:00:00",
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "nearest" in capsys.readouterr().err


def test_predict_history_across_split_is_usage_error(runs, tmp_path, capsys):
    rc = main(["predict", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--timestamp", "2025-01-01T00:00:00",
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "contiguous" in capsys.readouterr().err


def test_nonempty_out_needs_force(runs, tmp_path, capsys):
    out = tmp_path / "pred"
    argv = ["predict", "--manifest", runs["manifest"],
            "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
            "--timestamp", "2025-01-05T06:00:00", "--out", str(out)]
    assert main(argv) == 0
    assert main(argv) == 2
    assert "not empty" in capsys.readouterr().err
    assert main(argv + ["--force"]) == 0


def test_evaluate_writes_metrics(runs, tmp_path, capsys):
    out = tmp_path / "eval"
    rc = main(["evaluate", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--out", str(out), "--stride", "24", "--max-windows", "3",
               "--thresholds", "1,4"])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "CSI 1 mm" in stdout
    assert "CSI 4 mm" in stdout
    b = ScoreBreakdown.load_csv(out / "metrics.csv")
    assert b.pooled().total > 0
    thrs = {k[0] for k in b.cells}
    assert thrs == {1.0, 4.0}
    leads = {k[1] for k in b.cells}
    assert leads == {1, 2}
    monthly = ScoreBreakdown.load_csv(out / "summary_by_month.csv")
    assert {k[1] for k in monthly.cells} == {0}
    assert monthly.pooled().total == b.pooled().total


def test_evaluate_oracle_input_mode(runs, tmp_path):
    out = tmp_path / "eval"
    rc = main(["evaluate", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]), "--stage2", str(runs["s2"]),
               "--out", str(out), "--stride", "48", "--max-windows", "2",
               "--oracle-input"])
    assert rc == 0
    assert "oracle_input True" in (out / "run_config.txt").read_text()


def test_counterfactual_outputs(runs, tmp_path):
    out = tmp_path / "cf"
    rc = main(["counterfactual", "--manifest", runs["manifest"],
               "--stage1", str(runs["s1"]),
               "--timestamp", "2025-01-05T06:00:00",
               "--alt-timestamp", "2025-07-05T06:00:00", "--out", str(out)])
    assert rc == 0
    lines = (out / "difference.csv").read_text().strip().splitlines()
    assert lines[0] == "lead_h,mad"
    assert len(lines) == 3
    for ln in lines[1:]:
        assert float(ln.split(",")[1]) > 0.0
    for lead in (1, 2):
        assert (out / f"base_lead{lead:02d}.pgm").exists()
        assert (out / f"alt_lead{lead:02d}.pgm").exists()


def test_resume_continues_training(runs, tmp_path):
    out = tmp_path / "s1b"
    base = ["train-stage1", "--manifest", runs["manifest"],
            "--out", str(out), "--total-steps", "6"] + S1_FLAGS
    assert main(base + ["--steps", "2"]) == 0
    assert main(base + ["--steps", "2", "--force",
                        "--resume", str(out / "checkpoint.npmckpt")]) == 0
    lines = (out / "log.csv").read_text().strip().splitlines()
    assert [int(ln.split(",")[0]) for ln in lines[1:]] == [1, 2, 3, 4]


def test_config_file_and_flag_precedence(runs, tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("st_blocks 2\nenc_channels 4\n")
    out = tmp_path / "s1c"
    extra = ["--t-in", "2", "--t-out", "2", "--enc-dec-stages", "1",
             "--st-channels", "12", "--k-spatial-dw", "3",
             "--k-spatial-dwd", "3", "--spatial-dilation", "1",
             "--k-temporal", "3", "--mlp-ratio", "2", "--crop", "16"]
    rc = main(["train-stage1", "--manifest", runs["manifest"],
               "--out", str(out), "--steps", "1", "--config", str(cfg),
               "--enc-channels", "8"] + extra)
    assert rc == 0
    text = (out / "config.txt").read_text()
    assert "st_blocks 2" in text     # file value survives
    assert "enc_channels 8" in text  # explicit flag wins over the file


def test_unknown_config_key_is_usage_error(runs, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("wibble 3\n")
    rc = main(["gen-data", "--out", str(tmp_path / "d"), "--config", str(cfg)])
    assert rc == 2
    assert "wibble" in capsys.readouterr().err


def test_invalid_model_config_is_runtime_error(runs, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("grid 4\n")
    rc = main(["gen-data", "--out", str(tmp_path / "d"), "--config", str(cfg)])
    assert rc == 1
    assert "ConfigError" in capsys.readouterr().err


def test_no_embedding_flag_round_trips(runs, tmp_path):
    out = tmp_path / "s1ne"
    rc = main(["train-stage1", "--manifest", runs["manifest"],
               "--out", str(out), "--steps", "1", "--no-embedding"] + S1_FLAGS)
    assert rc == 0
    assert "use_embedding False" in (out / "config.txt").read_text()
    model, _ = _load_stage1(str(out))
    assert model.embed is None


def test_module_entrypoint_help():
    proc = subprocess.run([sys.executable, "-m", "npmcast.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("gen-data", "train-stage1", "train-stage2", "predict",
                "evaluate", "counterfactual"):
        assert sub in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "npmcast.cli"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
