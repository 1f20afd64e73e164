"""Figures written next to the TSV/JSON reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_conditions", "plot_latency", "plot_sweep"]

_RC = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.4,
    "savefig.dpi": 150,
    "svg.hashsalt": "expando",
}


def size(scale: float = 1.0) -> tuple[float, float]:
    width = 5.0 * scale
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * golden


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    # fixed metadata so repeated runs write identical files
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else {"Date": None})
    plt.close(fig)
    return path


def plot_sweep(series: Mapping[str, Sequence[tuple[int, float]]], path: str | Path) -> Path:
    """MRR@10 against number of appended queries, one line per decoding method."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=size())
        for (label, pts), marker in zip(series.items(), "ox^sd"):
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, marker=marker, label=label)
        ax.set_xlabel("# of queries appended")
        ax.set_ylabel("MRR@10")
        if len(series) > 1:
            ax.legend(loc="lower right")
        fig.tight_layout()
        return _save(fig, path)


def plot_latency(reports: Sequence, path: str | Path) -> Path:
    """Mean latency bars with p50/p95 markers per index."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=size())
        labels = [r.label for r in reports]
        xs = range(len(reports))
        ax.bar(xs, [r.mean_ms for r in reports], color="0.7", label="mean")
        ax.plot(xs, [r.p50_ms for r in reports], "k_", markersize=18, label="p50")
        ax.plot(xs, [r.p95_ms for r in reports], "r_", markersize=18, label="p95")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels)
        ax.set_ylabel("ms / query")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_conditions(rows: Sequence, path: str | Path, metric: str = "mrr10") -> Path:
    """Horizontal bars of one metric across retrieval conditions."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=size())
        names = [r.name for r in rows]
        vals = [getattr(r, metric) for r in rows]
        ax.barh(range(len(rows)), vals, color="0.55")
        ax.set_yticks(range(len(rows)))
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        ax.set_xlim(0, max(vals + [0.0]) * 1.15 or 1.0)
        ax.set_xlabel(metric.upper().replace("MRR10", "MRR@10"))
        for i, v in enumerate(vals):
            ax.text(v, i, f" {v:.3f}", va="center", fontsize=7)
        fig.tight_layout()
        return _save(fig, path)
