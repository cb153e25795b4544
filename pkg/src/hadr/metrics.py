"""Confusion counts, Recall / TNR / G-mean and ROC AUC.

Rates with an empty denominator come back as ``None`` rather than 0, so an
undefined score can never pass for a bad one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.fp + self.tn


def _binary(v, name):
    a = np.asarray(v).reshape(-1)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(np.int64)


def confusion(y_true, y_pred):
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} labels vs {p.size} predictions")
    if t.size == 0:
        raise ValueError("confusion of empty vectors")
    return ConfusionCounts(tp=int(np.sum((t == 1) & (p == 1))),
                           fn=int(np.sum((t == 1) & (p == 0))),
                           fp=int(np.sum((t == 0) & (p == 1))),
                           tn=int(np.sum((t == 0) & (p == 0))))


def recall(c):
    return c.tp / c.positives if c.positives else None


def tnr(c):
    return c.tn / c.negatives if c.negatives else None


def g_mean(c):
    r, s = recall(c), tnr(c)
    if r is None or s is None:
        return None
    return math.sqrt(r * s)


def auc_rank(y_true, scores):
    """Mann-Whitney AUC from mid-ranks (ties count one half)."""
    y, s = _check_scores(y_true, scores)
    r = rankdata(s)  # average ranks handle ties
    n1 = int(y.sum())
    n0 = y.size - n1
    u = r[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def roc_curve(y_true, scores):
    """ROC points ``(fpr, tpr, threshold)`` swept over every distinct score.

    The first point is ``(0, 0, +inf)``; thresholds decrease and the last
    point is ``(1, 1, min score)``.  A sample is called positive when its score
    is ``>= threshold``.
    """
    y, s = _check_scores(y_true, scores)
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    distinct = np.r_[np.flatnonzero(np.diff(s_sorted)), y.size - 1]
    tps = np.cumsum(y_sorted)[distinct]
    fps = (distinct + 1) - tps
    n1, n0 = tps[-1], fps[-1]
    fpr = np.r_[0.0, fps / n0]
    tpr = np.r_[0.0, tps / n1]
    thr = np.r_[np.inf, s_sorted[distinct]]
    return fpr, tpr, thr


def auc_trapezoid(y_true, scores):
    fpr, tpr, _ = roc_curve(y_true, scores)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(y_true, scores):
    """``(auc, points)`` with the rank-statistic AUC and the ROC polyline."""
    fpr, tpr, thr = roc_curve(y_true, scores)
    return auc_rank(y_true, scores), list(zip(fpr.tolist(), tpr.tolist(), thr.tolist()))


def _check_scores(y_true, scores):
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=float).reshape(-1)
    if y.shape != s.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {s.size} scores")
    if y.sum() == 0 or y.sum() == y.size:
        raise ValueError("AUC is undefined unless both classes are present")
    return y, s


def best_threshold_g_mean(y_true, scores):
    """Largest G-mean over all score thresholds, with the threshold used."""
    fpr, tpr, thr = roc_curve(y_true, scores)
    g = np.sqrt(tpr * (1.0 - fpr))
    k = int(np.argmax(g))
    return float(g[k]), float(thr[k])


@dataclass
class EvalReport:
    counts: ConfusionCounts
    recall: float | None
    tnr: float | None
    g_mean: float | None
    auc: float | None
    roc: list = field(default_factory=list)
    best_g_mean: float | None = None
    best_threshold: float | None = None
    seed: int | None = None
    dataset: str = ""

    def to_json(self):
        d = asdict(self)
        d["roc"] = [[f, t, (None if math.isinf(h) else h)] for f, t, h in self.roc]
        return d

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        obj["counts"] = ConfusionCounts(**obj["counts"])
        obj["roc"] = [(f, t, math.inf if h is None else h) for f, t, h in obj["roc"]]
        return cls(**obj)

    def roc_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for f, t, h in self.roc:
            w.writerow([repr(f), repr(t), "inf" if math.isinf(h) else repr(h)])
        return buf.getvalue()

    def summary(self):
        def fmt(v):
            return "n/a" if v is None else f"{v:.3f}"
        return f"recall={fmt(self.recall)} g_mean={fmt(self.g_mean)} auc={fmt(self.auc)}"


def evaluate_predictions(y_true, y_pred, scores, seed=None, dataset=""):
    """Build an :class:`EvalReport` from hard labels and continuous scores."""
    c = confusion(y_true, y_pred)
    auc, roc = roc_auc(y_true, scores)
    best_g, best_t = best_threshold_g_mean(y_true, scores)
    return EvalReport(c, recall(c), tnr(c), g_mean(c), auc, roc, best_g, best_t,
                      seed, dataset)
