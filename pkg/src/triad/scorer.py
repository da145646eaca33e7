"""Point-wise anomaly votes, vote threshold and final labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoSignalError(ValueError):
    pass


@dataclass
class ScoreVector:
    votes: np.ndarray
    threshold: float
    labels: np.ndarray
    rule: str = "mean"
    exception_fired: bool = False

    def summary(self):
        return {
            "threshold": float(self.threshold),
            "rule": self.rule,
            "exception_fired": bool(self.exception_fired),
            "n_positive": int(self.labels.sum()),
            "max_votes": int(self.votes.max()) if self.votes.size else 0,
        }


def vote(test_len, window, hits):
    """One vote for each point in the flagged window plus one per covering discord hit.

    ``window`` is ``(start, length)``; hits must already be in test coordinates.
    """
    t, L = window
    if t < 0 or t + L > test_len:
        raise ValueError(f"window [{t}, {t + L}) outside test range of {test_len}")
    # difference array keeps this linear in the number of hits
    diff = np.zeros(test_len + 1, dtype=np.int64)
    diff[t] += 1
    diff[t + L] -= 1
    for h in hits:
        if h.start < 0 or h.start + h.length > test_len:
            raise ValueError(f"hit [{h.start}, {h.start + h.length}) outside test range")
        diff[h.start] += 1
        diff[h.start + h.length] -= 1
    return np.cumsum(diff[:-1])


def _voted(votes):
    v = np.asarray(votes)
    voted = v[v >= 1]
    if voted.size == 0:
        raise NoSignalError("no point received a vote")
    return voted


def threshold(votes):
    """Mean vote over points with at least one vote."""
    return float(_voted(votes).mean())


def percentile_threshold(votes, q):
    if not 0 <= q <= 100:
        raise ValueError(f"percentile must lie in [0, 100], got {q}")
    return float(np.percentile(_voted(votes), q, method="linear"))


def hits_touch_window(hits, window):
    t, L = window
    return any(h.start < t + L and t < h.start + h.length for h in hits)


def classify(votes, delta, window, hits=None):
    """Strict ``votes > delta``; falls back to labelling the whole window.

    The fallback fires when no hit overlaps the window (when ``hits`` is
    given) or when nothing exceeds the threshold. Returns (labels, fired).
    """
    votes = np.asarray(votes)
    labels = (votes > delta).astype(np.int8)
    fired = (hits is not None and not hits_touch_window(hits, window)) or not labels.any()
    if fired:
        t, L = window
        labels = np.zeros_like(labels)
        labels[t:t + L] = 1
    return labels, fired


def score(test_len, window, hits, rule="mean", q=90.0):
    votes = vote(test_len, window, hits)
    delta = threshold(votes) if rule == "mean" else percentile_threshold(votes, q)
    labels, fired = classify(votes, delta, window, hits)
    name = "mean" if rule == "mean" else f"percentile:{q:g}"
    return ScoreVector(votes, delta, labels, name, fired)
