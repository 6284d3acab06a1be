"""PNG figures written next to the CLI's CSV summaries."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    from matplotlib import pyplot as plt
    plt.rcParams.update({"font.size": 9, "axes.grid": True, "grid.alpha": 0.3,
                         "figure.dpi": 100, "savefig.bbox": "tight"})
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    fig.clf()
    import matplotlib.pyplot as plt
    plt.close(fig)
    return path


def series(path, x, ys: dict, *, xlabel: str, ylabel: str, logy: bool = False,
           hline: float | None = None, title: str | None = None) -> Path:
    """One or more curves sharing an x axis; ``ys`` maps label to values."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", ms=3, lw=1.2, label=label)
    if hline is not None:
        ax.axhline(hline, color="k", ls="--", lw=0.8, label="threshold")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ys) > 1 or hline is not None:
        ax.legend(frameon=False)
    return _save(fig, path)


def spectrum_plot(path, freqs, magnitudes, *, threshold: float | None = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.vlines(freqs, 0, magnitudes, lw=0.8)
    if threshold is not None:
        ax.axhline(threshold, color="C3", ls="--", lw=0.8)
    ax.set_xlabel("frequency n")
    ax.set_ylabel("|coefficient|")
    return _save(fig, path)


def measure_plot(path, mu, *, centers=(), radius: float = 0.0, second=None) -> Path:
    """Weights against position, with the granule balls shaded.

    ``second`` is an optional measure drawn in another colour, e.g. mu2.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6))
    _draw_weights(ax, mu, "C0", "mu1" if second is not None else "mu")
    if second is not None:
        _draw_weights(ax, second, "C1", "mu2")
        ax.legend(frameon=False)
    for c in centers:
        c = c / mu.Q
        for shift in (-1.0, 0.0, 1.0):
            ax.axvspan(c + shift - radius, c + shift + radius, color="C2", alpha=0.25, lw=0)
    ax.set_xlim(-0.02, 1.02)
    ax.set_xlabel("position on the circle")
    ax.set_ylabel("weight")
    return _save(fig, path)


def _draw_weights(ax, mu, color, label):
    # stems stay visible for atoms; dense measures are drawn as a curve
    supp = mu.support
    if supp.size <= 4096:
        ax.vlines(supp / mu.Q, 0, mu.weights[supp], color=color, lw=1.0, label=label)
    else:
        ax.plot(mu.points(), mu.weights, color=color, lw=0.8, label=label)


def points_plot(path, points, *, title: str | None = None) -> Path:
    plt = _pyplot()
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.scatter(p[:, 0], p[:, 1], s=4)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def bars(path, labels, values, *, ylabel: str) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
