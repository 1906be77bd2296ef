"""Figure rendering for experiment outputs.

Each report path writes a PNG next to its delimited output: welfare and
regret curves for learning runs, margin scatters for smoothness suites,
and ratio-versus-bound bars for reproductions.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .learning import PlayHistory
from .smoothness import SmoothnessReport


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_learning(history: PlayHistory, path: str | Path, opt: float | None = None) -> Path:
    """Rolling mean welfare plus per-agent bid traces."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    t = np.arange(1, history.rounds + 1)
    window = max(history.rounds // 50, 1)
    kernel = np.ones(window) / window
    smoothed = np.convolve(history.welfare, kernel, mode="valid")
    ax1.plot(t[window - 1 :], smoothed, lw=1.2, label="welfare (rolling mean)")
    ax1.axhline(history.mean_welfare(), color="gray", ls=":", lw=1, label="run mean")
    if opt is not None:
        ax1.axhline(opt, color="tab:red", ls="--", lw=1, label="optimum")
    ax1.set_xlabel("round")
    ax1.set_ylabel("welfare")
    ax1.legend(fontsize=8)
    for i in range(history.agents):
        ax2.plot(t, history.bids[:, i], lw=0.6, alpha=0.8, label=f"agent {i}")
    ax2.set_xlabel("round")
    ax2.set_ylabel("bid")
    if history.agents <= 6:
        ax2.legend(fontsize=8)
    return _save(fig, path)


def plot_margins(reports: Sequence[SmoothnessReport], path: str | Path) -> Path:
    """Margin distribution per smoothness suite."""
    fig, ax = plt.subplots(figsize=(6, 3.4))
    for k, rep in enumerate(reports):
        xs = np.full(len(rep.margins), k) + np.linspace(-0.18, 0.18, len(rep.margins))
        ax.scatter(xs, rep.margins, s=6, alpha=0.6)
    ax.axhline(0.0, color="tab:red", lw=1, ls="--")
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels([r.mechanism for r in reports], fontsize=8)
    ax.set_ylabel("inequality margin")
    return _save(fig, path)


def plot_records(records: Sequence, path: str | Path) -> Path:
    """Ratio against bound, one bar pair per record."""
    fig, ax = plt.subplots(figsize=(6, 3.4))
    idx = np.arange(len(records))
    ratios = [r.ratio if r.ratio is not None else np.nan for r in records]
    bounds = [r.bound if r.bound is not None else np.nan for r in records]
    ax.bar(idx - 0.18, ratios, width=0.36, label="measured ratio")
    ax.bar(idx + 0.18, bounds, width=0.36, label="bound", alpha=0.7)
    ax.set_xticks(idx)
    ax.set_xticklabels([f"{r.experiment}:{r.seed}" for r in records], fontsize=7, rotation=30)
    ax.set_ylabel("welfare ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)
