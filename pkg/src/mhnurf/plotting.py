"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .stats import ScottKnottRanking, median_order  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # no timestamp so reruns produce identical files
    "svg.hashsalt": "mhnurf",
}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, metadata={"Software": None} if path.suffix.lower() == ".png" else None)
    plt.close(fig)


def plot_ranking(treatments: Mapping[str, Sequence[float]], ranking: ScottKnottRanking,
                 path: str | Path, metric: str = "AUC") -> Path:
    """Horizontal AUC boxplots in median order, one colour per Scott-Knott rank."""
    order = median_order(treatments)
    ranks = {name: ranking.rank_of(name) for name in order}
    n_ranks = max(ranks.values())
    with plt.rc_context(RC):
        cmap = plt.get_cmap("viridis", max(n_ranks, 2))
        fig, ax = plt.subplots(figsize=(6.0, 0.45 * len(order) + 1.2))
        parts = ax.boxplot([treatments[k] for k in order][::-1], orientation="horizontal", patch_artist=True,
                           widths=0.6, medianprops={"color": "black"})
        ax.set_yticks(range(1, len(order) + 1))
        ax.set_yticklabels([f"{k}  (rank {ranks[k]})" for k in order][::-1])
        for box, name in zip(parts["boxes"], order[::-1]):
            box.set_facecolor(cmap((ranks[name] - 1) / max(n_ranks - 1, 1)))
            box.set_alpha(0.8)
        ax.set_xlabel(metric)
        ax.set_title(f"Scott-Knott ranking over {max(len(v) for v in treatments.values())} runs")
        ax.grid(axis="x", alpha=0.3)
        _save(fig, path)
    return Path(path)


def plot_loss_history(history: Sequence[float], path: str | Path, label: str = "") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.plot(range(1, len(history) + 1), history, marker="o", markersize=3, label=label or None)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean training loss")
        if label:
            ax.legend()
        ax.grid(alpha=0.3)
        _save(fig, path)
    return Path(path)
