"""Synthetic periodic series with one planted anomaly, written in UCR file convention."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .series import DatasetMeta, write_ucr

KINDS = ("noise", "duration", "seasonal", "trend", "level_shift", "contextual")


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    n_train: int = 4000
    n_test: int = 3000
    period: int = 50
    anomaly_len: int = 100
    anomaly_start: int | None = None  # test coordinates; random when None
    noise: float = 0.05
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}; choose from {KINDS}")
        if self.anomaly_len < 1 or self.anomaly_len >= self.n_test:
            raise ValueError(f"anomaly length {self.anomaly_len} does not fit the test split")
        if self.anomaly_start is not None and not (
                0 <= self.anomaly_start <= self.n_test - self.anomaly_len):
            raise ValueError(f"anomaly at {self.anomaly_start} does not fit the test split")
        if self.period < 4:
            raise ValueError("period must be >= 4")


def _base(phase):
    return np.sin(phase) + 0.4 * np.sin(2 * phase + 0.7)


def generate(spec):
    """Returns (values, DatasetMeta) for the full train+test series."""
    spec.validate()
    # separate streams: the background (and so the training split) depends only on the seed
    rng = np.random.default_rng([spec.seed, 1])
    background = np.random.default_rng([spec.seed, 0])
    n = spec.n_train + spec.n_test
    idx = np.arange(n, dtype=np.float64)
    phase = 2 * np.pi * idx / spec.period
    length = spec.anomaly_len
    if spec.anomaly_start is None:
        margin = min(2 * spec.period, (spec.n_test - length) // 4)
        start = int(rng.integers(margin, spec.n_test - length - margin + 1))
    else:
        start = spec.anomaly_start
    b = spec.n_train + start
    e = b + length
    seg = np.arange(b, e, dtype=np.float64)
    u = (seg - b) / length  # 0..1 across the anomaly

    x = _base(phase)
    scale = float(np.std(x))
    if spec.kind == "noise":
        x[b:e] += rng.normal(0.0, 0.6 * scale, size=length)
    elif spec.kind == "duration":
        x[b:e] = x[b]
    elif spec.kind == "seasonal":
        # twice the frequency, phase-continuous at the anomaly start
        x[b:e] = _base(phase[b] + 2 * (phase[b:e] - phase[b]))
    elif spec.kind == "trend":
        x[b:e] += 2.0 * scale * u
    elif spec.kind == "level_shift":
        x[b:e] += 3.0 * scale
    elif spec.kind == "contextual":
        # smooth local time warp: compresses then stretches the cycle, same endpoints
        warp = 0.25 * spec.period * np.sin(np.pi * u)
        x[b:e] = _base(2 * np.pi * (seg + warp) / spec.period)
    x = x + background.normal(0.0, spec.noise, size=n)
    return x, DatasetMeta(spec.n_train, b, e - 1)


def dataset_name(spec, meta, index=0):
    return f"{index:03d}_SYN_{spec.kind}_{meta.train_end}_{meta.anomaly_begin}_{meta.anomaly_end}"


def write(spec, outdir, index=0):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    values, meta = generate(spec)
    return write_ucr(outdir / f"{dataset_name(spec, meta, index)}.txt", values)


SUITE_LENGTHS = {
    "noise": (20, 120),
    "duration": (40, 160),
    "seasonal": (60, 200),
    "trend": (80, 180),
    "level_shift": (30, 100),
    "contextual": (50, 150),
}


def suite_specs(seed=0, n_train=4000, n_test=3000, period=50):
    """Two datasets per anomaly kind, anomaly lengths between 20 and 200."""
    specs = []
    for k, kind in enumerate(KINDS):
        for j, length in enumerate(SUITE_LENGTHS[kind]):
            specs.append(SynthSpec(kind, n_train, n_test, period, length,
                                   seed=seed * 1000 + 10 * k + j))
    return specs


def write_suite(outdir, seed=0, **kw):
    """Write the suite plus a manifest listing it; returns the manifest path."""
    outdir = Path(outdir)
    paths = [write(s, outdir, i) for i, s in enumerate(suite_specs(seed, **kw))]
    manifest = outdir / "manifest.txt"
    manifest.write_text("".join(f"{p.name}\n" for p in paths))
    return manifest
