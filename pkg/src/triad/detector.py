"""Window-level localization: per-domain deviance, tri-window nomination, single-window pick."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import DOMAINS
from .series import segment, stack_windows


class InsufficientWindowsError(ValueError):
    pass


@dataclass
class CandidateWindows:
    starts: dict  # domain -> window start (test coordinates)
    scores: dict  # domain -> deviance of that window
    deviance: dict = field(default_factory=dict, repr=False)  # domain -> full vector
    window_starts: np.ndarray = field(default=None, repr=False)

    @property
    def distinct(self):
        """Distinct nominated starts, ascending."""
        return sorted(set(self.starts.values()))


@dataclass(frozen=True)
class SearchRegion:
    start: int  # chosen window start
    window_len: int
    begin: int
    end: int  # exclusive

    @property
    def length(self):
        return self.end - self.begin


def domain_deviance(embeddings):
    """Negative mean dot-product similarity of each window to every other window."""
    r = np.asarray(embeddings, dtype=np.float64)
    m = r.shape[0]
    if m < 2:
        raise InsufficientWindowsError(f"need >= 2 windows to compare, got {m}")
    sim = r @ r.T
    off = sim.sum(axis=1) - np.diag(sim)
    return -off / (m - 1)


def tri_window(test_series, model, top_z=1):
    """Nominate the most deviant window per domain (ties -> earliest start)."""
    windows, starts = stack_windows(segment(test_series, model.seg))
    if len(windows) < 2:
        raise InsufficientWindowsError("test split yields fewer than two windows")
    emb = model.embed(windows)
    chosen, scores, dev = {}, {}, {}
    for d in DOMAINS:
        dev[d] = domain_deviance(emb[d])
        # stable sort on -deviance keeps earliest start first among ties
        order = np.argsort(-dev[d], kind="stable")[:top_z]
        chosen[d] = int(starts[order[0]])
        scores[d] = float(dev[d][order[0]])
    return CandidateWindows(chosen, scores, dev, starts)


def _znorm_rows(x):
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    return np.where(sd > 1e-10, (x - mu) / np.where(sd > 1e-10, sd, 1.0), 0.0)


def nn_distance_to_reference(query, reference, probe_stride=1):
    """Nearest z-normalized Euclidean distance from ``query`` to reference subsequences."""
    q = np.asarray(query, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    L = q.size
    if ref.size < L:
        raise ValueError(f"reference of length {ref.size} shorter than query {L}")
    starts = np.arange(0, ref.size - L + 1, probe_stride)
    subs = np.lib.stride_tricks.sliding_window_view(ref, L)[starts]
    d = _znorm_rows(subs) - _znorm_rows(q)
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", d, d))))


def select_single(cands, train_values, window_len, test_values, probe_stride=None):
    """Candidate start whose window lies farthest from all training subsequences.

    Returns (start, {start: nn_distance}).
    """
    if probe_stride is None:
        probe_stride = max(1, window_len // 4)
    starts = cands.distinct if isinstance(cands, CandidateWindows) else sorted(set(cands))
    dists = {}
    for s in starts:
        dists[s] = nn_distance_to_reference(test_values[s:s + window_len], train_values,
                                            probe_stride)
    best = max(starts, key=lambda s: (dists[s], -s))
    return best, dists


def make_search_region(t, window_len, test_len, pad=None):
    if pad is None:
        pad = window_len
    if not 0 <= t <= test_len - window_len:
        raise ValueError(f"window start {t} invalid for test length {test_len}")
    return SearchRegion(t, window_len, max(0, t - pad), min(test_len, t + window_len + pad))
