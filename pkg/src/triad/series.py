"""Dataset ingestion, normalization, period estimation and window segmentation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SeriesError(ValueError):
    """Base class for series-level failures."""


class MetadataParseError(SeriesError):
    pass


class ParseError(SeriesError):
    pass


class DegeneratePeriodError(SeriesError):
    pass


class InsufficientDataError(SeriesError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise SeriesError("a time series needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise SeriesError(f"series {self.name!r} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def slice(self, start, stop, name=None):
        return TimeSeries(self.values[start:stop], name or self.name)


@dataclass(frozen=True)
class DatasetMeta:
    """Split point and the single labelled anomaly (inclusive end), in file coordinates."""

    train_end: int
    anomaly_begin: int
    anomaly_end: int

    def validate(self, n):
        if not (0 < self.train_end <= self.anomaly_begin <= self.anomaly_end < n):
            raise MetadataParseError(
                f"metadata {self} inconsistent with series length {n}"
            )

    def test_span(self):
        """Anomaly span in test-split coordinates, end inclusive."""
        return self.anomaly_begin - self.train_end, self.anomaly_end - self.train_end


@dataclass(frozen=True)
class SegmentationConfig:
    window_len: int
    stride: int
    period: int

    def __post_init__(self):
        if self.window_len < 4:
            raise SeriesError(f"window length must be >= 4, got {self.window_len}")
        if not 1 <= self.stride <= self.window_len:
            raise SeriesError(f"stride must lie in [1, L], got {self.stride}")

    @classmethod
    def from_period(cls, period, window_len=None, stride=None):
        """Window of 2.5 periods, stride a quarter of the window."""
        L = window_len if window_len is not None else max(4, int(round(2.5 * period)))
        s = stride if stride is not None else max(1, L // 4)
        return cls(window_len=L, stride=s, period=int(period))


@dataclass(frozen=True)
class WindowSlice:
    start: int
    values: np.ndarray = field(repr=False)


_META_RE = re.compile(r"_(\d+)_(\d+)_(\d+)$")


def parse_ucr_name(path):
    stem = Path(path).stem
    m = _META_RE.search(stem)
    if m is None:
        raise MetadataParseError(
            f"{Path(path).name}: expected three trailing '_<int>' tokens"
        )
    return DatasetMeta(*(int(g) for g in m.groups()))


def load_ucr(path):
    """Read a UCR anomaly-archive text file; metadata comes from the filename."""
    path = Path(path)
    meta = parse_ucr_name(path)
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            for tok in line.split():
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ParseError(
                        f"{path.name}:{lineno}: non-numeric token {tok!r}"
                    ) from None
    if not values:
        raise ParseError(f"{path.name}: no samples")
    ts = TimeSeries(np.array(values), name=path.stem)
    meta.validate(len(ts))
    return ts, meta


def write_ucr(path, values):
    """Write values one per line using repr precision so load_ucr round-trips."""
    path = Path(path)
    path.write_text("".join(f"{float(v)!r}\n" for v in values))
    return path


def read_manifest(path):
    """One dataset path per line; blank lines and '#' comments ignored.

    Relative entries resolve against the manifest's directory.
    """
    path = Path(path)
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        out.append(p if p.is_absolute() else path.parent / p)
    return out


def znormalize(ts, mean, std):
    if std == 0:
        return TimeSeries(np.zeros(len(ts)), ts.name)
    return TimeSeries((ts.values - mean) / std, ts.name)


def denormalize(ts, mean, std):
    return TimeSeries(ts.values * std + mean, ts.name)


def split_stats(train):
    return float(np.mean(train.values)), float(np.std(train.values))


def estimate_period(train):
    """Period from the dominant DFT bin of the mean-removed series.

    Clamped to [4, N/4] so a window of 2.5 periods always fits several times.
    """
    x = np.asarray(train.values, dtype=np.float64)
    n = x.size
    if n < 16:
        raise InsufficientDataError(f"period estimation needs >= 16 samples, got {n}")
    power = np.abs(np.fft.rfft(x - x.mean())) ** 2
    kmax = (n + 1) // 2  # k < N/2
    band = power[1:kmax]
    if band.size == 0 or not np.any(band > 1e-12 * max(1.0, float(np.sum(x * x)))):
        raise DegeneratePeriodError(f"{train.name!r}: flat spectrum, no dominant period")
    k_star = int(np.argmax(band)) + 1
    period = int(round(n / k_star))
    return int(min(max(period, 4), n // 4))


def window_starts(n, window_len, stride):
    if n < window_len:
        raise InsufficientDataError(f"series of length {n} shorter than window {window_len}")
    starts = list(range(0, n - window_len + 1, stride))
    if starts[-1] + window_len != n:
        starts.append(n - window_len)
    return starts


def segment(ts, cfg):
    starts = window_starts(len(ts), cfg.window_len, cfg.stride)
    return [WindowSlice(s, ts.values[s:s + cfg.window_len]) for s in starts]


def stack_windows(windows):
    return np.stack([w.values for w in windows]), np.array([w.start for w in windows])
