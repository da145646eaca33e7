import numpy as np
import pytest

from triad.series import SegmentationConfig, TimeSeries
from triad.train import LossConfig, train

SMALL = dict(epochs=4, depth=3, hidden=8, batch_size=8, seed=0)


def sinusoid(n, period=20, noise=0.05, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return np.sin(2 * np.pi * t / period) + 0.4 * np.sin(4 * np.pi * t / period + 0.7) \
        + rng.normal(0, noise, n)


@pytest.fixture(scope="session")
def small_model():
    x = sinusoid(1200)
    mean, std = float(x.mean()), float(x.std())
    seg = SegmentationConfig.from_period(20)
    model = train(TimeSeries((x - mean) / std), LossConfig(**SMALL), seg, mean, std)
    return model, (x - mean) / std


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
