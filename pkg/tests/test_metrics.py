"""Verification scores against a per-pixel counting oracle, None handling
for empty denominators, CSV round-trips, and pooled breakdowns."""

import numpy as np
import pytest

from npmcast.metrics import (CSV_HEADER, ContingencyTable, ScoreBreakdown,
                             contingency, csi, evaluate_run, far, mse, pod)
from npmcast.tensor import ConfigError, ShapeError, Tensor


def counting_oracle(pred, obs, thr, mask=None):
    """Pixel-by-pixel python loop; deliberately nothing like the package."""
    tp = fp = fn = tn = 0
    p = np.asarray(pred).ravel()
    o = np.asarray(obs).ravel()
    m = np.ones(p.size, dtype=bool) if mask is None else \
        np.asarray(mask, dtype=bool).ravel()
    for i in range(p.size):
        if not m[i]:
            continue
        pe, oe = p[i] >= thr, o[i] >= thr
        if pe and oe:
            tp += 1
        elif pe:
            fp += 1
        elif oe:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def test_counts_match_oracle_on_random_grids():
    rng = np.random.default_rng(0)
    for _ in range(60):
        h, w = rng.integers(1, 9, size=2)
        pred = rng.uniform(0, 10, size=(h, w))
        obs = rng.uniform(0, 10, size=(h, w))
        thr = float(rng.uniform(0.5, 9.5))
        t = contingency(pred, obs, thr)
        assert (t.tp, t.fp, t.fn, t.tn) == counting_oracle(pred, obs, thr)
        assert t.total == h * w


def test_scores_match_hand_table():
    t = ContingencyTable(tp=3, fp=1, fn=2, tn=10)
    assert csi(t) == pytest.approx(3 / 6)
    assert pod(t) == pytest.approx(3 / 5)
    assert far(t) == pytest.approx(1 / 4)


def test_zero_denominators_give_none():
    none_at_all = ContingencyTable(tn=5)
    assert csi(none_at_all) is None
    assert pod(none_at_all) is None
    assert far(none_at_all) is None
    only_missed = ContingencyTable(fn=2, tn=5)
    assert far(only_missed) is None
    assert pod(only_missed) == 0.0
    assert csi(only_missed) == 0.0


def test_mask_excludes_pixels():
    pred = np.array([[2.0, 0.0], [2.0, 2.0]])
    obs = np.array([[2.0, 2.0], [0.0, 2.0]])
    mask = np.array([[True, True], [False, True]])
    t = contingency(pred, obs, 1.0, mask)
    assert (t.tp, t.fp, t.fn, t.tn) == (2, 0, 1, 0)
    assert t.total == 3
    assert (t.tp, t.fp, t.fn, t.tn) == counting_oracle(pred, obs, 1.0, mask)


def test_contingency_accepts_tensors_and_validates():
    pred = Tensor(np.ones((2, 2), dtype=np.float32) * 3)
    obs = np.zeros((2, 2))
    t = contingency(pred, obs, 1.0)
    assert (t.tp, t.fp, t.fn, t.tn) == (0, 4, 0, 0)
    with pytest.raises(ConfigError, match="threshold"):
        contingency(obs, obs, 0.0)
    with pytest.raises(ShapeError):
        contingency(np.zeros((2, 2)), np.zeros((2, 3)), 1.0)
    with pytest.raises(ShapeError, match="mask"):
        contingency(obs, obs, 1.0, mask=np.ones((3, 3), dtype=bool))


def test_mse_plain_and_masked():
    pred = np.array([1.0, 2.0, 5.0])
    obs = np.array([0.0, 2.0, 1.0])
    assert mse(pred, obs) == pytest.approx((1 + 0 + 16) / 3)
    assert mse(pred, obs, mask=[True, True, False]) == pytest.approx(0.5)
    with pytest.raises(ShapeError):
        mse(pred, np.zeros(4))


def test_breakdown_pooling_and_merge():
    b = ScoreBreakdown()
    b.add(1.0, 1, 6, ContingencyTable(tp=2, fp=1))
    b.add(1.0, 1, 6, ContingencyTable(fn=3))
    b.add(1.0, 2, 6, ContingencyTable(tp=5))
    b.add(4.0, 1, 7, ContingencyTable(tn=9))
    cell = b.pooled(threshold=1.0, lead=1, month=6)
    assert (cell.tp, cell.fp, cell.fn, cell.tn) == (2, 1, 3, 0)
    assert b.pooled(threshold=1.0).tp == 7
    assert b.pooled(month=7).tn == 9
    assert b.pooled().total == 2 + 1 + 3 + 5 + 9
    other = ScoreBreakdown()
    other.add(1.0, 1, 6, ContingencyTable(tp=10))
    b.merge(other)
    assert b.pooled(threshold=1.0, lead=1, month=6).tp == 12


def test_csv_roundtrip_and_none_cells():
    b = ScoreBreakdown()
    b.add(1.0, 1, 6, ContingencyTable(tp=3, fp=1, fn=2, tn=10))
    b.add(8.0, 2, 12, ContingencyTable(tn=4))
    text = b.to_csv_text()
    lines = text.strip().splitlines()
    assert lines[0] == CSV_HEADER
    # the all-quiet cell exports empty score fields
    quiet = [ln for ln in lines if ln.startswith("8.0")][0]
    assert quiet.endswith(",,,")
    back = ScoreBreakdown.from_csv_text(text)
    assert back.cells == b.cells
    assert back.to_csv_text() == text


def test_csv_rejects_malformed(tmp_path):
    with pytest.raises(ValueError, match="header"):
        ScoreBreakdown.from_csv_text("nope\n1,2,3\n")
    with pytest.raises(ValueError, match="line 2"):
        ScoreBreakdown.from_csv_text(CSV_HEADER + "\n1.0,1,6,1,2\n")
    path = tmp_path / "m.csv"
    b = ScoreBreakdown()
    b.add(1.0, 1, 1, ContingencyTable(tp=1))
    b.save_csv(path)
    assert ScoreBreakdown.load_csv(path).cells == b.cells


def test_evaluate_run_pools_and_skips():
    rng = np.random.default_rng(5)
    obs = {k: rng.uniform(0, 10, size=(4, 4)) for k in range(3)}
    preds = [(0, 6, 1, rng.uniform(0, 10, size=(4, 4))),
             (1, 6, 1, rng.uniform(0, 10, size=(4, 4))),
             (2, 7, 2, rng.uniform(0, 10, size=(4, 4))),
             (9, 7, 2, rng.uniform(0, 10, size=(4, 4)))]
    breakdown, skipped = evaluate_run(preds, obs, thresholds=(1.0, 4.0))
    assert skipped == [(9, 2)]
    got = breakdown.pooled(threshold=1.0, lead=1, month=6)
    want0 = counting_oracle(preds[0][3], obs[0], 1.0)
    want1 = counting_oracle(preds[1][3], obs[1], 1.0)
    assert (got.tp, got.fp, got.fn, got.tn) == tuple(
        a + b for a, b in zip(want0, want1))
    # every threshold shows up for every scored pair
    assert len(breakdown.cells) == 2 * 2
