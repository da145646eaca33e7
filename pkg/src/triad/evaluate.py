"""Point-wise, point-adjusted, PA%K and affiliation metrics for single-event test sets."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _pair(pred, truth):
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def truth_from_span(n, begin, end):
    """Binary ground truth with an inclusive anomaly span."""
    y = np.zeros(n, dtype=np.int8)
    y[begin:end + 1] = 1
    return y


def event_segments(truth):
    """(begin, end_exclusive) of each run of ones."""
    t = np.concatenate([[0], np.asarray(truth).astype(np.int8), [0]])
    edges = np.flatnonzero(np.diff(t))
    return list(zip(edges[::2], edges[1::2]))


def f1_pointwise(pred, truth):
    pred, truth = _pair(pred, truth)
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def pa_percent_k(pred, truth, k):
    """Fill an anomaly segment only when its detected fraction strictly exceeds K%."""
    pred, truth = _pair(pred, truth)
    if not 0 <= k <= 100:
        raise ValueError(f"K must lie in [0, 100], got {k}")
    out = pred.copy()
    for b, e in event_segments(truth):
        if pred[b:e].sum() / (e - b) > k / 100.0:
            out[b:e] = True
    return out.astype(np.int8)


def point_adjust(pred, truth):
    return pa_percent_k(pred, truth, 0)


def pa_k_curve(pred, truth, ks=range(1, 101)):
    """Rows of (K, precision, recall, F1) after PA%K adjustment."""
    pred, truth = _pair(pred, truth)
    rows = []
    for k in ks:
        rows.append((k, *f1_pointwise(pa_percent_k(pred, truth, k), truth)))
    return rows


def pa_k_auc(pred, truth):
    """Mean precision, recall and F1 over integer K = 1..100."""
    rows = np.array(pa_k_curve(pred, truth))
    return tuple(float(v) for v in rows[:, 1:].mean(axis=0))


def _count_far(d, left, right):
    """Number of integer points x with x <= left - d or x >= right + d (d >= 1)."""
    return np.maximum(0, left - d + 1) + np.maximum(0, right - d + 1)


def precision_survival(d, n, begin, end):
    """P(dist(X, event) >= d) for X uniform on {0..n-1}; event [begin, end] inclusive."""
    d = np.asarray(d)
    far = _count_far(d, begin, n - 1 - end)
    return np.where(d <= 0, 1.0, far / n)


def recall_survival(d, n, a):
    """P(|X - a| >= d) for X uniform on {0..n-1}."""
    d = np.asarray(d)
    far = _count_far(d, a, n - 1 - a)
    return np.where(d <= 0, 1.0, far / n)


def _dist_to_set(points, members):
    """min |p - m| over sorted members, for each p."""
    idx = np.searchsorted(members, points)
    lo = members[np.clip(idx - 1, 0, members.size - 1)]
    hi = members[np.clip(idx, 0, members.size - 1)]
    return np.minimum(np.abs(points - lo), np.abs(points - hi))


def affiliation(pred, truth):
    """Single-event affiliation precision/recall with the whole series as the zone.

    Returns (precision, recall, f1, empty_prediction_flag).
    """
    pred, truth = _pair(pred, truth)
    segs = event_segments(truth)
    if len(segs) != 1:
        raise ValueError(f"affiliation expects exactly one ground-truth event, got {len(segs)}")
    n = truth.size
    begin, end = segs[0][0], segs[0][1] - 1
    predicted = np.flatnonzero(pred)
    event = np.arange(begin, end + 1)
    if predicted.size == 0:
        return 0.0, 0.0, 0.0, True
    d_pred = np.where(predicted < begin, begin - predicted,
                      np.where(predicted > end, predicted - end, 0))
    precision = float(precision_survival(d_pred, n, begin, end).mean())
    d_event = _dist_to_set(event, predicted)
    recall = float(recall_survival(d_event, n, event).mean())
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, False


@dataclass
class MetricReport:
    precision_pw: float
    recall_pw: float
    f1_pw: float
    f1_pa: float
    pa_k_precision_auc: float
    pa_k_recall_auc: float
    pa_k_f1_auc: float
    affiliation_precision: float
    affiliation_recall: float
    affiliation_f1: float
    empty_prediction: bool = False

    def to_dict(self):
        return {k: (round(v, 12) if isinstance(v, float) else v) for k, v in asdict(self).items()}


def evaluate(pred, truth):
    p, r, f = f1_pointwise(pred, truth)
    _, _, f_pa = f1_pointwise(point_adjust(pred, truth), truth)
    pk, rk, fk = pa_k_auc(pred, truth)
    ap, ar, af, empty = affiliation(pred, truth)
    return MetricReport(p, r, f, f_pa, pk, rk, fk, ap, ar, af, empty)
