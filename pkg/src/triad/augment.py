"""Localized jitter / magnitude-warp corruption of training windows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, lfilter_zi

SEGMENT_FRACTION = (0.1, 0.5)
NOISE_RANGE = (0.5, 2.0)
CUTOFF_RANGE = (0.02, 0.15)
WARP_ORDER = 2


class FilterParameterError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str
    start: int
    length: int
    noise_scale: float = 0.0
    cutoff: float = 0.0
    order: int = WARP_ORDER

    def validate(self, window_len):
        if self.kind not in ("jitter", "warp"):
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if self.length < 1 or self.start < 0 or self.start + self.length > window_len:
            raise ValueError(f"segment [{self.start}, {self.start + self.length}) "
                             f"outside window of length {window_len}")
        if self.kind == "jitter" and self.noise_scale <= 0:
            raise ValueError("jitter needs a positive noise scale")
        if self.kind == "warp" and not 0 < self.cutoff <= 0.5:
            raise ValueError("warp cutoff must lie in (0, 0.5]")


def jitter_segment(window, spec, rng):
    x = np.array(window, dtype=np.float64)
    j, l = spec.start, spec.length
    x[j:j + l] += rng.normal(0.0, spec.noise_scale, size=l)
    return x


def _poly_mul(a, b):
    return np.convolve(a, b)


def butterworth_coefficients(cutoff, order):
    """Digital low-pass (b, a) via the bilinear transform with pre-warping.

    ``cutoff`` is in cycles/sample, Nyquist = 0.5.
    """
    if not 0 < cutoff < 0.5:
        raise FilterParameterError(f"cutoff must lie strictly in (0, 0.5), got {cutoff}")
    if order not in (1, 2, 3, 4):
        raise FilterParameterError(f"order must be 1..4, got {order}")
    # pre-warped analog cutoff for sampling interval T=2 (absorbs the 2/T factor)
    wa = math.tan(math.pi * cutoff)
    b = np.array([1.0])
    a = np.array([1.0])
    for k in range(order // 2):
        theta = math.pi * (2 * k + 1) / (2 * order)
        # s^2 + 2 sin(theta) wa s + wa^2, s = (1 - z^-1) / (1 + z^-1)
        c = 2.0 * math.sin(theta) * wa
        a = _poly_mul(a, [1.0 + c + wa * wa, 2.0 * (wa * wa - 1.0), 1.0 - c + wa * wa])
        b = _poly_mul(b, [wa * wa, 2.0 * wa * wa, wa * wa])
    if order % 2:
        a = _poly_mul(a, [1.0 + wa, wa - 1.0])
        b = _poly_mul(b, [wa, wa])
    b, a = b / a[0], a / a[0]
    if np.any(np.abs(np.roots(a)) >= 1.0):
        raise FilterParameterError(f"unstable filter for cutoff={cutoff}, order={order}")
    # force unit DC gain exactly
    b = b * (a.sum() / b.sum())
    return b, a


def _single_pass(b, a, x, zi):
    y, _ = lfilter(b, a, x, zi=zi * x[0])
    return y


def _pad_odd(x, npad):
    npad = min(npad, x.size - 1)
    if npad <= 0:
        return x, 0
    left = 2 * x[0] - x[npad:0:-1]
    right = 2 * x[-1] - x[-2:-npad - 2:-1]
    return np.concatenate([left, x, right]), npad


def lowpass_single(signal, cutoff, order=WARP_ORDER):
    """One causal pass, started in steady state from the first sample."""
    b, a = butterworth_coefficients(cutoff, order)
    x = np.asarray(signal, dtype=np.float64)
    return _single_pass(b, a, x, lfilter_zi(b, a))


def butterworth_lowpass(signal, cutoff, order=WARP_ORDER):
    """Zero-phase Butterworth low-pass.

    Forward-backward and backward-forward cascades are averaged so the
    result is exactly time-reversal symmetric; both share the same
    squared-magnitude response.
    """
    b, a = butterworth_coefficients(cutoff, order)
    x = np.asarray(signal, dtype=np.float64)
    if x.size < 2:
        return x.copy()
    zi = lfilter_zi(b, a)
    # padding spans several impulse-response lengths so edge transients die out
    xp, npad = _pad_odd(x, int(math.ceil(4.0 / cutoff)))

    def fb(v):
        y = _single_pass(b, a, v, zi)
        return _single_pass(b, a, y[::-1], zi)[::-1]

    y = 0.5 * (fb(xp) + fb(xp[::-1])[::-1])
    return y[npad:npad + x.size] if npad else y


def warp_segment(window, spec):
    x = np.array(window, dtype=np.float64)
    smooth = butterworth_lowpass(x, spec.cutoff, spec.order)
    j, l = spec.start, spec.length
    x[j:j + l] = smooth[j:j + l]
    return x


def random_spec(window_len, rng):
    if window_len < 8:
        raise ValueError(f"augmentation needs windows of >= 8 samples, got {window_len}")
    kind = "jitter" if rng.random() < 0.5 else "warp"
    lo = max(1, int(math.ceil(window_len * SEGMENT_FRACTION[0])))
    hi = max(lo, int(window_len * SEGMENT_FRACTION[1]))
    length = int(rng.integers(lo, hi + 1))
    start = int(rng.integers(0, window_len - length + 1))
    if kind == "jitter":
        return AugmentationSpec(kind, start, length, noise_scale=float(rng.uniform(*NOISE_RANGE)))
    return AugmentationSpec(kind, start, length, cutoff=float(rng.uniform(*CUTOFF_RANGE)))


def random_augment(window, rng):
    """Corrupt one random segment of ``window``; returns (augmented, spec)."""
    x = np.asarray(window, dtype=np.float64)
    spec = random_spec(x.size, rng)
    out = jitter_segment(x, spec, rng) if spec.kind == "jitter" else warp_segment(x, spec)
    if np.array_equal(out, x):
        # smoothing a segment that is already smooth can be a no-op; fall back to noise
        spec = AugmentationSpec("jitter", spec.start, spec.length,
                                noise_scale=float(rng.uniform(*NOISE_RANGE)))
        out = jitter_segment(x, spec, rng)
    return out, spec


def augment_batch(windows, rng):
    out = np.empty_like(np.asarray(windows, dtype=np.float64))
    specs = []
    for i, w in enumerate(windows):
        out[i], spec = random_augment(w, rng)
        specs.append(spec)
    return out, specs
