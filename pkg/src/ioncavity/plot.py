"""Static SVG plots of the command outputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ioncavity"


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def lines(path, x, series: dict, xlabel: str, ylabel: str, logx=False, logy=False, markers=False):
    """One axis, one line per entry of ``series`` (label -> y)."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, y in series.items():
        ax.plot(x, y, "o-" if markers else "-", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


def positions(path, positions_um, title=""):
    fig, ax = plt.subplots(figsize=(5, 2.4))
    r = np.asarray(positions_um)
    ax.plot(r[:, 1], r[:, 0], "o")
    ax.set_xlabel("y (um)")
    ax.set_ylabel("x (um)")
    if title:
        ax.set_title(title, fontsize=9)
    return _save(fig, path)


def bars(path, labels, values, ylabel, reference=None):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(labels, values, color="tab:blue", label="steady state")
    if reference is not None:
        ax.plot(labels, reference, "k_", ms=14, label="bath")
        ax.legend(fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_yscale("log")
    return _save(fig, path)
