"""Wall-clock timings of the pipeline stages and of the search-region saving."""

from __future__ import annotations

import time

from . import discord
from .pipeline import default_l_max, detect, fit, prepare


def span_ratio(test_len, window_len, pad=None):
    """N_test / (L + 2*pad), the nominal reduction in the span searched for discords."""
    pad = window_len if pad is None else pad
    return test_len / (window_len + 2 * pad)


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


def bench(path, cfg, full_search=True, model=None):
    """Per-stage timings for one dataset plus constrained-vs-full discord search."""
    ds = prepare(path, cfg)
    if model is None:
        model, t_train = _timed(fit, ds, cfg)
    else:
        ds.seg, t_train = model.seg, 0.0
    det, t_infer = _timed(detect, model, ds.train, ds.test, cfg)
    L = ds.seg.window_len
    l_max = cfg.l_max or default_l_max(det.region.length, L)
    out = {
        "dataset": ds.name,
        "n_test": int(ds.test.size),
        "window_len": L,
        "search_span": det.region.length,
        "span_ratio": span_ratio(ds.test.size, L, cfg.pad),
        "l_range": [cfg.l_min, l_max],
        "seconds": {"train": t_train, "inference": t_infer, **det.timings},
    }
    if full_search:
        lengths = discord.length_schedule(cfg.l_min, l_max, cfg.l_step)
        _, t_full = _timed(discord.merlin, ds.test, lengths=lengths)
        out["seconds"]["discord_full"] = t_full
        out["speedup"] = t_full / det.timings["discord"]
    return out


def sweep(path, cfg, fractions=(0.25, 0.5, 1.0), model=None):
    """Inference and full-series discord timings on growing prefixes of the test split.

    Each prefix keeps the planted anomaly only if it fits, so this measures
    cost rather than accuracy.
    """
    ds = prepare(path, cfg)
    if model is None:
        model = fit(ds, cfg)
    L = model.seg.window_len
    rows = []
    for f in fractions:
        n = max(4 * L, int(round(f * ds.test.size)))
        test = ds.test[:n]
        det, t_infer = _timed(detect, model, ds.train, test, cfg)
        l_max = cfg.l_max or default_l_max(det.region.length, L)
        lengths = discord.length_schedule(cfg.l_min, l_max, cfg.l_step)
        _, t_full = _timed(discord.merlin, test, lengths=lengths)
        rows.append({"n_test": n, "inference": t_infer, "discord_full": t_full})
    return rows
