"""Temporal, frequency and residual feature blocks for a window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAINS = ("temporal", "frequency", "residual")
CHANNELS = {"temporal": 1, "frequency": 3, "residual": 1}


@dataclass(frozen=True)
class Spectrum:
    re: np.ndarray
    im: np.ndarray


@dataclass(frozen=True)
class DomainFeatures:
    domain: str
    channels: np.ndarray  # (L, C)

    def __post_init__(self):
        if self.domain not in CHANNELS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.channels.ndim != 2 or self.channels.shape[1] != CHANNELS[self.domain]:
            raise ValueError(
                f"{self.domain} features need {CHANNELS[self.domain]} channels, "
                f"got shape {self.channels.shape}"
            )


def dft(window):
    """Discrete Fourier transform (fast path; matches the O(L^2) sum)."""
    X = np.fft.fft(np.asarray(window, dtype=np.float64), axis=-1)
    return Spectrum(X.real.copy(), X.imag.copy())


def freq_features(s):
    """Amplitude, phase and power channels stacked on the last axis.

    Phase follows arctan(Re/Im) in two-argument form, so a purely real
    coefficient maps to +-pi/2 and a zero coefficient to 0.
    """
    power = s.re ** 2 + s.im ** 2
    amp = np.sqrt(power)
    phase = np.arctan2(s.re, s.im)
    phase = np.where((s.re == 0) & (s.im == 0), 0.0, phase)
    return np.stack([amp, phase, power], axis=-1)


def residual_features(window, period):
    """Window minus its phase-mean seasonal profile (phase = position mod period)."""
    x = np.asarray(window, dtype=np.float64)
    if period < 2:
        raise ValueError(f"period must be >= 2, got {period}")
    L = x.shape[-1]
    phase = np.arange(L) % period
    onehot = np.zeros((L, period))
    onehot[np.arange(L), phase] = 1.0
    counts = onehot.sum(axis=0)
    counts[counts == 0] = 1.0
    means = (x @ onehot) / counts
    return x - means[..., phase]


def standardize_channels(feat):
    """Per-window, per-channel z-scoring over the time axis; flat channels -> 0."""
    mu = feat.mean(axis=-2, keepdims=True)
    sd = feat.std(axis=-2, keepdims=True)
    safe = np.where(sd > 1e-12, sd, 1.0)
    return np.where(sd > 1e-12, (feat - mu) / safe, 0.0)


def extract(window, domain, period):
    """Feature block for one window.

    Frequency channels are returned raw here; the encoder path uses
    :func:`batch_features`, which standardizes them.
    """
    values = window.values if hasattr(window, "values") else np.asarray(window, float)
    if domain == "temporal":
        ch = values[:, None].astype(np.float64)
    elif domain == "frequency":
        ch = freq_features(dft(values))
    elif domain == "residual":
        ch = residual_features(values, period)[:, None]
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return DomainFeatures(domain, ch)


def batch_features(windows, period):
    """Encoder-ready features for an (M, L) array of windows, one entry per domain."""
    w = np.asarray(windows, dtype=np.float64)
    return {
        "temporal": w[..., None],
        "frequency": standardize_channels(freq_features(dft(w))),
        "residual": residual_features(w, period)[..., None],
    }
