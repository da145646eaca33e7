"""Exact fixed- and variable-length discord discovery.

``brute_force_discord`` is the exhaustive reference. ``drag`` is the
two-phase range search (gather candidates that have no neighbour closer
than ``r``, then refine them exactly). ``merlin`` sweeps lengths and adapts
``r`` from previously found discord distances. Whenever ``r`` does not
exceed the true discord distance, ``drag`` returns exactly the brute-force
answer, so every hit ``merlin`` reports is exact.

A subsequence's nearest neighbour is restricted to starts ``j`` with
``|i - j| >= l``. Subsequences with no admissible neighbour are never
reported as discords.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONSTANT_EPS = 1e-10
R_FLOOR = 1e-10


class DiscordError(ValueError):
    pass


@dataclass(frozen=True)
class DiscordHit:
    length: int
    start: int
    distance: float

    @property
    def end(self):
        return self.start + self.length

    def shifted(self, offset):
        return DiscordHit(self.length, self.start + offset, self.distance)


def znormalize_rows(x):
    """Z-normalize along the last axis; (near-)constant rows map to zeros."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    flat = sd <= CONSTANT_EPS
    return np.where(flat, 0.0, (x - mu) / np.where(flat, 1.0, sd))


def subsequence_matrix(segment, l):
    """All z-normalized length-``l`` subsequences of ``segment`` as rows."""
    x = np.asarray(segment, dtype=np.float64)
    return znormalize_rows(np.lib.stride_tricks.sliding_window_view(x, l))


def znorm_dist(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DiscordError(f"length mismatch {a.shape} vs {b.shape}")
    return float(_dists(znormalize_rows(a)[None, :], znormalize_rows(b))[0])


def _dists(block, q):
    """Euclidean distances from each row of ``block`` to ``q``.

    Every distance in this module goes through here so that the exhaustive
    and pruned searches produce bit-identical values.
    """
    d = block - q
    return np.sqrt(np.sum(d * d, axis=-1))


def _check(segment, l):
    n = len(segment)
    if l < 3:
        raise DiscordError(f"subsequence length must be >= 3, got {l}")
    if n < 2 * l:
        raise DiscordError(f"segment of length {n} too short for l={l} (needs >= {2 * l})")


def _nn_of(Z, i, l):
    """Exact nearest admissible-neighbour distance of subsequence ``i``."""
    d = _dists(Z, Z[i])
    lo, hi = max(0, i - l + 1), min(len(Z), i + l)
    d[lo:hi] = np.inf
    return float(d.min())


def nn_profile(segment, l, Z=None):
    """Nearest admissible-neighbour distance for every subsequence (inf if none)."""
    _check(segment, l)
    Z = subsequence_matrix(segment, l) if Z is None else Z
    return np.array([_nn_of(Z, i, l) for i in range(len(Z))])


def _argmax_hit(nn, l):
    finite = np.where(np.isfinite(nn), nn, -np.inf)
    i = int(np.argmax(finite))  # first maximum -> earliest start
    if not np.isfinite(finite[i]):
        raise DiscordError("no subsequence has an admissible neighbour")
    return DiscordHit(l, i, float(finite[i]))


def brute_force_discord(segment, l):
    return _argmax_hit(nn_profile(segment, l), l)


def _approx_tol(sq_a, sq_b):
    """Bound on the rounding error of a squared distance computed from dot products."""
    return 1e-9 * (sq_a + sq_b + 1.0)


def _approx_nn_sq(Z, sq, idx, l, block=256):
    """Squared NN distance of each subsequence in ``idx`` via dot products (approximate)."""
    n = len(Z)
    out = np.empty(len(idx))
    pos = np.arange(n)[:, None]
    for s in range(0, len(idx), block):
        c = idx[s:s + block]
        d2 = sq[:, None] + sq[c][None, :] - 2.0 * (Z @ Z[c].T)
        d2[np.abs(pos - c[None, :]) < l] = np.inf
        out[s:s + block] = d2.min(axis=0)
    return out


def drag(segment, l, r, Z=None):
    """Range-aware discord search; returns a DiscordHit or None if nothing survives ``r``.

    Both phases screen with dot-product distances, acting only when the
    screen is conclusive beyond its rounding bound. Reported distances
    always come from the exact path shared with the brute-force search.
    """
    _check(segment, l)
    if r < 0:
        raise DiscordError(f"range threshold must be >= 0, got {r}")
    Z = subsequence_matrix(segment, l) if Z is None else Z
    n_sub = len(Z)
    sq = np.einsum("ij,ij->i", Z, Z)
    r2 = r * r

    # phase 1: candidates kept in ascending start order
    cands = np.empty(n_sub, dtype=np.int64)
    k = 0
    for i in range(n_sub):
        # candidates with start <= i - l do not overlap i
        m = int(np.searchsorted(cands[:k], i - l, side="right"))
        is_cand = True
        if m:
            c = cands[:m]
            dots = Z[:i - l + 1] @ Z[i]
            d2 = sq[c] + sq[i] - 2.0 * dots[c]
            close = d2 < r2 - _approx_tol(sq[c], sq[i])
            if close.any():
                is_cand = False
                keep = np.concatenate([c[~close], cands[m:k]])
                k = keep.size
                cands[:k] = keep
        if is_cand:
            cands[k] = i
            k += 1
    if k == 0:
        return None

    # phase 2: screen survivors, then refine the possible winners exactly
    surv = cands[:k]
    approx = _approx_nn_sq(Z, sq, surv, l)
    tol = _approx_tol(2.0 * l, 2.0 * l)
    finite = np.isfinite(approx)
    if not finite.any():
        return None
    top = approx[finite].max()
    keep = finite & (approx >= r2 - tol) & (approx >= top - 2.0 * tol)
    best = None
    for c in surv[keep]:
        nn = _nn_of(Z, int(c), l)
        if not np.isfinite(nn) or nn < r:
            continue
        if best is None or nn > best.distance:
            best = DiscordHit(l, int(c), nn)
    return best


def length_schedule(l_min, l_max, l_step=None):
    """Unit steps up to 64, then about 256 steps across the full range."""
    if l_min < 3 or l_max < l_min:
        raise DiscordError(f"invalid length range [{l_min}, {l_max}]")
    if l_step is not None:
        return list(range(l_min, l_max + 1, l_step))
    dense_end = min(64, l_max)
    out = list(range(l_min, dense_end + 1))
    coarse = max(1, (l_max - l_min) // 256)
    out.extend(range(dense_end + coarse, l_max + 1, coarse))
    if out[-1] != l_max:
        out.append(l_max)
    return out


def merlin(segment, l_min=None, l_max=None, l_step=None, lengths=None, stats=None):
    """One exact discord per length, with the search radius adapted across lengths.

    ``stats``, if given, is a dict that receives the number of drag calls.
    """
    x = np.asarray(segment, dtype=np.float64)
    if lengths is None:
        if l_min is None or l_max is None:
            raise DiscordError("give either lengths or l_min/l_max")
        if l_max > len(x) // 2:
            raise DiscordError(f"l_max={l_max} exceeds half the segment ({len(x)})")
        lengths = length_schedule(l_min, l_max, l_step)
    hits = []
    calls = 0
    for idx, l in enumerate(lengths):
        _check(x, l)
        Z = subsequence_matrix(x, l)
        if idx == 0:
            r = 2.0 * math.sqrt(l)
        elif idx < 5:
            r = 0.99 * hits[-1].distance
        else:
            last = np.array([h.distance for h in hits[-5:]])
            r = max(float(last.mean() - 2.0 * last.std()), R_FLOOR)
        while True:
            calls += 1
            hit = drag(x, l, r, Z)
            if hit is not None:
                break
            if r == 0.0:
                raise DiscordError(f"no discord exists at length {l}")
            # below the floor accept everything, which always yields the exact discord
            r = r / 2.0 if r / 2.0 >= R_FLOOR else 0.0
        hits.append(hit)
    if stats is not None:
        stats["drag_calls"] = calls
    return hits
