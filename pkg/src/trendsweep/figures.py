"""Render plot-series files to PNG figures.

The engine itself stays headless; the CLI report path calls into this
module to drop a figure next to each delimited artifact. Curves are
colored by cluster, removed rows drawn as dashed red lines with their
removal iteration in the legend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .kmeans import OutlierRun
from .report import PlotSeries, SeriesAxis, emit_plot_series
from .searchlight import SearchlightResult

__all__ = ["render_series", "render_run", "render_searchlight_ranking"]

_MAX_LEGEND_OUTLIERS = 8


def render_series(
    series: tuple[PlotSeries, ...],
    path: str | Path,
    title: str = "",
    xlabel: str = "year",
    ylabel: str = "value",
) -> Path:
    """Line chart of a series collection; returns the written path."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(9, 5.5))
    cmap = plt.get_cmap("tab10")
    seen_clusters: set[int] = set()
    n_outliers = 0
    for s in series:
        if s.role == "outlier":
            n_outliers += 1
            label = None
            if n_outliers <= _MAX_LEGEND_OUTLIERS:
                label = f"{'/'.join(s.series_id)} (iter {s.iteration_removed})"
            ax.plot(s.x, s.y, color="red", linestyle="--", linewidth=1.6, label=label, zorder=3)
        else:
            cid = s.cluster_id or 0
            label = f"cluster {cid}" if cid not in seen_clusters else None
            seen_clusters.add(cid)
            ax.plot(s.x, s.y, color=cmap(cid % 10), linewidth=0.8, alpha=0.7, label=label)
    if title:
        ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if seen_clusters or n_outliers:
        ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_run(
    run: OutlierRun,
    path: str | Path,
    title: str = "",
    axis: SeriesAxis = SeriesAxis.BY_YEAR,
    ylabel: str = "value",
) -> Path:
    xlabel = "year" if axis is SeriesAxis.BY_YEAR else "category index"
    return render_series(emit_plot_series(run, axis), path, title, xlabel, ylabel)


def render_searchlight_ranking(result: SearchlightResult, path: str | Path) -> Path:
    """Horizontal bar chart of per-dimension max outlier scores."""
    path = Path(path)
    dims = [e.dimension for e in result.entries]
    scores = [e.max_outlier_score for e in result.entries]
    counts = [e.outlier_count for e in result.entries]
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.5 * len(dims) + 1)))
    ypos = range(len(dims))
    ax.barh(list(ypos), scores, color="steelblue")
    for y, (score, count) in enumerate(zip(scores, counts)):
        ax.text(score, y, f" {count} outlier(s)", va="center", fontsize=8)
    ax.set_yticks(list(ypos))
    ax.set_yticklabels(dims, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("max outlier score")
    ax.set_title("dimension ranking")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
