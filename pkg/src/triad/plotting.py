"""SVG figures of a detection run."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns write identical files
plt.rcParams["svg.hashsalt"] = "triad"


def plot_detection(path, ds, det):
    test = ds.test
    x = np.arange(test.size)
    b, e = ds.meta.test_span()
    L = ds.seg.window_len
    fig, axes = plt.subplots(3, 1, figsize=(11, 6.5), sharex=True,
                             gridspec_kw={"height_ratios": [3, 1.3, 1]})

    ax = axes[0]
    ax.plot(x, test, lw=0.6, color="0.25")
    ax.axvspan(b, e + 1, color="tab:red", alpha=0.25, label="ground truth")
    ax.axvspan(det.region.begin, det.region.end, color="tab:orange", alpha=0.12,
               label="search region")
    ax.axvspan(det.chosen, det.chosen + L, fill=False, ec="tab:blue", lw=1.2,
               label="flagged window")
    ax.set_ylabel("value (z)")
    ax.legend(loc="upper right", fontsize=8, ncol=3)
    ax.set_title(ds.name, fontsize=10)

    ax = axes[1]
    ax.step(x, det.scores.votes, where="mid", lw=0.8, color="tab:purple")
    ax.axhline(det.scores.threshold, ls="--", lw=0.8, color="k")
    ax.set_ylabel("votes")

    ax = axes[2]
    ax.fill_between(x, 0, det.scores.labels, step="mid", color="tab:green", alpha=0.7,
                    label="predicted")
    truth = ds.truth()
    ax.step(x, truth * 1.0, where="mid", color="tab:red", lw=0.8, label="truth")
    ax.set_ylim(-0.1, 1.2)
    ax.set_yticks([0, 1])
    ax.set_xlabel("test timestamp")
    ax.legend(loc="upper right", fontsize=8, ncol=2)

    # zoom on the region of interest when the test split is long
    lo = max(0, min(b, det.region.begin) - 2 * L)
    hi = min(test.size, max(e + 1, det.region.end) + 2 * L)
    if hi - lo < test.size:
        axes[0].set_xlim(lo, hi)

    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
