"""Figure rendering for the command-line reports.

Only the CLI imports this module, so the library proper never touches
matplotlib and pipeline outputs stay byte-reproducible.  All figures
use the non-interactive backend and deterministic layouts.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .graphs import Mark, MixedGraph  # noqa: E402
from .simulate import MetricsReport  # noqa: E402
from .tabular import DataTable  # noqa: E402

__all__ = ["render_graph", "render_metrics", "render_table_overview"]


def _circle_layout(nodes: list[str]) -> dict[str, tuple[float, float]]:
    positions = {}
    for i, name in enumerate(nodes):
        angle = 2.0 * math.pi * i / max(1, len(nodes))
        positions[name] = (math.cos(angle), math.sin(angle))
    return positions


def _endpoint_glyph(ax, x, y, dx, dy, mark: Mark) -> None:
    """Draw the edge-end mark just inside the node: an arrowhead, an
    open circle, or nothing for a plain tail."""
    if mark is Mark.ARROW:
        ax.annotate("", xy=(x, y), xytext=(x - 0.12 * dx, y - 0.12 * dy),
                    arrowprops={"arrowstyle": "-|>", "color": "black",
                                "shrinkA": 0.0, "shrinkB": 0.0})
    elif mark is Mark.CIRCLE:
        ax.plot([x - 0.06 * dx], [y - 0.06 * dy], marker="o",
                markerfacecolor="white", markeredgecolor="black",
                markersize=6, zorder=3)


def render_graph(graph: MixedGraph, path, title: str | None = None) -> None:
    """Draw the graph on a circle with endpoint marks and save it."""
    nodes = list(graph.nodes)
    pos = _circle_layout(nodes)
    fig, ax = plt.subplots(figsize=(7, 7))
    for a, b, mark_a, mark_b in graph.edges():
        (xa, ya), (xb, yb) = pos[a], pos[b]
        dx, dy = xb - xa, yb - ya
        norm = math.hypot(dx, dy) or 1.0
        ux, uy = dx / norm, dy / norm
        # trim the segment so marks sit outside the node labels
        xa2, ya2 = xa + 0.12 * ux, ya + 0.12 * uy
        xb2, yb2 = xb - 0.12 * ux, yb - 0.12 * uy
        ax.plot([xa2, xb2], [ya2, yb2], color="black", linewidth=1.2,
                zorder=1)
        _endpoint_glyph(ax, xa2, ya2, -ux, -uy, mark_a)
        _endpoint_glyph(ax, xb2, yb2, ux, uy, mark_b)
    for name, (x, y) in pos.items():
        ax.text(x, y, name, ha="center", va="center", fontsize=9,
                bbox={"boxstyle": "round,pad=0.3", "facecolor": "#eef",
                      "edgecolor": "#88a"}, zorder=4)
    ax.set_xlim(-1.35, 1.35)
    ax.set_ylim(-1.35, 1.35)
    ax.set_aspect("equal")
    ax.axis("off")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_metrics(report: MetricsReport, path) -> None:
    """Bar chart of the adjacency/orientation rates; SHD in the title."""
    labels = ["precision", "recall", "f1", "orientation"]
    values = [report.adjacency_precision, report.adjacency_recall,
              report.adjacency_f1, report.orientation_accuracy]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(labels, values, color="#4878a8")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title(f"graph comparison (SHD = {report.shd})")
    for i, v in enumerate(values):
        ax.text(i, v + 0.02, f"{v:.2f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_table_overview(table: DataTable, path, max_cols: int = 12) -> None:
    """Grid of per-column distributions: bars for categorical columns,
    histograms for continuous ones."""
    names = list(table.names)[:max_cols]
    n = len(names)
    ncols = min(4, n)
    nrows = math.ceil(n / ncols)
    fig, axes = plt.subplots(nrows, ncols,
                             figsize=(3.2 * ncols, 2.6 * nrows),
                             squeeze=False)
    for ax in axes.flat[n:]:
        ax.axis("off")
    for ax, name in zip(axes.flat, names):
        col = table.column(name)
        if table.is_categorical(name):
            counts = np.bincount(col, minlength=table.cardinality(name))
            levels = table.meta(name).levels
            ax.bar(range(len(counts)), counts, color="#4878a8")
            ax.set_xticks(range(len(counts)))
            ax.set_xticklabels(levels, fontsize=7, rotation=45)
        else:
            ax.hist(col, bins=20, color="#4878a8")
        ax.set_title(name, fontsize=8)
        ax.tick_params(labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
