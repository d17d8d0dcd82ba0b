"""Deterministic SVG plots for sweep records.

All figures render through the Agg backend with a fixed hash salt and no
embedded timestamps, so re-rendering the same records reproduces the same
bytes.
"""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "manisep"

__all__ = [
    "convergence_plot",
    "phase_plot",
    "counterexample_plot",
    "downstream_plot",
    "lowerbound_plot",
]

_SAVE_OPTS = dict(format="svg", metadata={"Date": None})


def _median_series(records, metric, x_key="n", series_key="method"):
    """records -> {series: (xs, medians)} for one metric, median over seeds."""
    buckets = defaultdict(lambda: defaultdict(list))
    for row in records:
        if row["metric"] != metric:
            continue
        buckets[row[series_key]][row[x_key]].append(row["value"])
    out = {}
    for series, by_x in buckets.items():
        xs = sorted(by_x)
        out[series] = (xs, [float(np.median(by_x[x])) for x in xs])
    return out


def convergence_plot(records, path, metrics=("align_error_2",)) -> None:
    """Log-log eigenvector error against sample size, one line per method
    and metric."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for metric in metrics:
        for series, (xs, med) in sorted(_median_series(records, metric).items()):
            ax.plot(xs, med, marker="o", label=f"{series} {metric}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median error")
    ax.legend(fontsize=8)
    ax.set_title("eigenvector convergence")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def phase_plot(records, path, d: int, d_s: int) -> None:
    """Success heatmap over (n, separation) per method with the two rate
    curves overlaid."""
    methods = sorted({row["method"] for row in records if row["metric"] == "accuracy"})
    ns = sorted({row["n"] for row in records if row["metric"] == "accuracy"})
    deltas = sorted({row["delta"] for row in records if row["metric"] == "accuracy"})
    fig, axes = plt.subplots(1, max(len(methods), 1), figsize=(5 * max(len(methods), 1), 4.2), squeeze=False)
    for ax, method in zip(axes[0], methods):
        grid = np.full((len(deltas), len(ns)), np.nan)
        cells = defaultdict(list)
        for row in records:
            if row["metric"] == "accuracy" and row["method"] == method:
                cells[(row["delta"], row["n"])].append(row["value"])
        for i, dl in enumerate(deltas):
            for j, n in enumerate(ns):
                vals = cells.get((dl, n))
                if vals:
                    grid[i, j] = float(np.median(vals))
        im = ax.pcolormesh(
            np.arange(len(ns) + 1), np.arange(len(deltas) + 1), grid,
            vmin=0.5, vmax=1.0, cmap="viridis",
        )
        xs = np.arange(len(ns)) + 0.5
        rate = np.array([math.log(n) / n for n in ns])
        for exponent, label in ((1.0 / d, "full-dim rate"), (1.0 / d_s, "signal-dim rate")):
            curve = rate**exponent
            ys = np.interp(curve, deltas, np.arange(len(deltas)) + 0.5)
            ax.plot(xs, ys, marker="x", label=label)
        ax.set_xticks(xs)
        ax.set_xticklabels([str(n) for n in ns], fontsize=8)
        ax.set_yticks(np.arange(len(deltas)) + 0.5)
        ax.set_yticklabels([f"{dl:g}" for dl in deltas], fontsize=8)
        ax.set_xlabel("n")
        ax.set_ylabel("separation")
        ax.set_title(f"{method} accuracy")
        ax.legend(fontsize=7)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def counterexample_plot(records, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for metric in ("accuracy", "align_error_max"):
        for series, (xs, med) in sorted(_median_series(records, metric).items()):
            ax.plot(xs, med, marker="o", label=f"{series} {metric}")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median value")
    ax.axhline(0.5, color="gray", lw=0.8, ls="--")
    ax.legend(fontsize=8)
    ax.set_title("glued copies: clustering and base-spectrum alignment")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def downstream_plot(records, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.2))
    for ax, x_key in zip(axes, ("m", "n")):
        plotted = False
        for series, (xs, med) in sorted(
            _median_series(records, "xi", x_key=x_key).items()
        ):
            ax.plot(xs, med, marker="o", label=series)
            plotted = True
        ax.set_xlabel(x_key)
        ax.set_ylabel("misclassification rate")
        ax.set_ylim(-0.02, 0.55)
        if plotted:
            ax.legend(fontsize=8)
    axes[0].set_title("labeled-set size sweep")
    axes[1].set_title("representation-sample sweep")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def lowerbound_plot(records, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for metric in ("chi2_bound", "error_sum"):
        for series, (xs, med) in sorted(_median_series(records, metric).items()):
            ax.plot(xs, med, marker="o", label=f"{series} {metric}")
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.legend(fontsize=8)
    ax.set_title("testing lower bound: bound vs simulated error sum")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
