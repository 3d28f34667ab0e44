"""Categorical forecast verification: CSI, POD, FAR over rain thresholds,
pooled per (threshold, lead hour, calendar month), plus continuous MSE.

An event is value >= threshold. Contingency counts are pooled across frames
before scoring (never averaged per-frame scores). Scores with a zero
denominator are None, exported as empty CSV cells; 0 would conflate "no
events occurred" with "no skill".
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ConfigError, ShapeError


@dataclass(frozen=True)
class ContingencyTable:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other):
        return ContingencyTable(self.tp + other.tp, self.fp + other.fp,
                                self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def _values(x):
    # ndarray first: ndarray.data is its buffer, not the values.
    if isinstance(x, np.ndarray):
        return x
    return x.data if hasattr(x, "data") else np.asarray(x)


def contingency(pred, obs, threshold, mask=None):
    """Count events (value >= threshold) in pred against obs.

    mask, when given, is boolean with True marking pixels to evaluate;
    masked-out pixels join no count.
    """
    p = _values(pred)
    o = _values(obs)
    if p.shape != o.shape:
        raise ShapeError(f"contingency shapes differ: {p.shape} vs {o.shape}")
    if threshold <= 0:
        raise ConfigError(f"threshold must be > 0, got {threshold}")
    pe = p >= threshold
    oe = o >= threshold
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.shape != p.shape:
            raise ShapeError(f"mask shape {m.shape} != field shape {p.shape}")
        pe, oe = pe[m], oe[m]
    return ContingencyTable(
        tp=int(np.count_nonzero(pe & oe)),
        fp=int(np.count_nonzero(pe & ~oe)),
        fn=int(np.count_nonzero(~pe & oe)),
        tn=int(np.count_nonzero(~pe & ~oe)))


def csi(t):
    d = t.tp + t.fp + t.fn
    return t.tp / d if d else None


def pod(t):
    d = t.tp + t.fn
    return t.tp / d if d else None


def far(t):
    d = t.tp + t.fp
    return t.fp / d if d else None


def mse(pred, obs, mask=None):
    p = _values(pred).astype(np.float64)
    o = _values(obs).astype(np.float64)
    if p.shape != o.shape:
        raise ShapeError(f"mse shapes differ: {p.shape} vs {o.shape}")
    d = (p - o) ** 2
    if mask is not None:
        d = d[np.asarray(mask, dtype=bool)]
    return float(d.mean())


CSV_HEADER = "threshold_mm,lead_h,month,tp,fp,fn,tn,csi,pod,far"


class ScoreBreakdown:
    """Pooled contingency counts keyed by (threshold, lead hour, month)."""

    def __init__(self):
        self.cells = {}

    def add(self, threshold, lead, month, table):
        key = (float(threshold), int(lead), int(month))
        self.cells[key] = self.cells.get(key, ContingencyTable()) + table

    def merge(self, other):
        for key, table in other.cells.items():
            self.cells[key] = self.cells.get(key, ContingencyTable()) + table

    def pooled(self, threshold=None, lead=None, month=None):
        """Sum counts over all cells matching the given fixed fields."""
        out = ContingencyTable()
        for (t, l, m), table in self.cells.items():
            if ((threshold is None or t == float(threshold))
                    and (lead is None or l == int(lead))
                    and (month is None or m == int(month))):
                out = out + table
        return out

    def rows(self):
        for key in sorted(self.cells):
            t = self.cells[key]
            yield key + (t.tp, t.fp, t.fn, t.tn, csi(t), pod(t), far(t))

    def to_csv_text(self):
        def fmt(v):
            return "" if v is None else repr(v)
        lines = [CSV_HEADER]
        for thr, lead, month, tp_, fp_, fn_, tn_, c, p, f in self.rows():
            lines.append(",".join([repr(thr), str(lead), str(month),
                                   str(tp_), str(fp_), str(fn_), str(tn_),
                                   fmt(c), fmt(p), fmt(f)]))
        return "\n".join(lines) + "\n"

    def save_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv_text())

    @staticmethod
    def from_csv_text(text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(
                f"bad metrics CSV header: {lines[0] if lines else '<empty>'!r}")
        out = ScoreBreakdown()
        for ln, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != 10:
                raise ValueError(f"line {ln}: expected 10 fields, got {len(parts)}")
            thr, lead, month = float(parts[0]), int(parts[1]), int(parts[2])
            table = ContingencyTable(tp=int(parts[3]), fp=int(parts[4]),
                                     fn=int(parts[5]), tn=int(parts[6]))
            out.add(thr, lead, month, table)
        return out

    @staticmethod
    def load_csv(path):
        with open(path) as fh:
            return ScoreBreakdown.from_csv_text(fh.read())


def evaluate_run(predictions, observations, thresholds=(1.0, 4.0, 8.0),
                 mask=None):
    """Accumulate a ScoreBreakdown from aligned prediction/observation pairs.

    predictions: iterable of (valid_key, month, lead_hours, rain field mm/h).
    observations: mapping valid_key -> observed rain field mm/h.
    Returns (breakdown, skipped) where skipped lists (valid_key, lead_hours)
    pairs whose observation was missing.
    """
    breakdown = ScoreBreakdown()
    skipped = []
    for valid_key, month, lead, pred in predictions:
        obs = observations.get(valid_key)
        if obs is None:
            skipped.append((valid_key, lead))
            continue
        for thr in thresholds:
            breakdown.add(thr, lead, month, contingency(pred, obs, thr, mask))
    return breakdown, skipped
