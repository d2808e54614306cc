"""SVG figures for diagrams, point clouds and PCA projections.

Figures are built on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) so they can be rendered from worker threads.  SVG output
is made reproducible by fixing the id salt and dropping the date stamp.
Each plotted series carries a ``gid`` so tests can find it in the XML.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from .persistence import PersistenceDiagram

MARKERS = ("o", "^", "s", "D")
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
_SVG_RC = {"svg.hashsalt": "topoprobe", "svg.fonttype": "none", "font.size": 9}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    with rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def plot_diagram(diagram: PersistenceDiagram, path, title: Optional[str] = None) -> Path:
    """Birth on x, death on y; one marker per dimension; infinite deaths on a top band."""
    with rc_context(_SVG_RC):
        fig = Figure(figsize=(4.5, 4.5))
        ax = fig.add_subplot()
        finite_deaths = diagram.death[np.isfinite(diagram.death)]
        top = max(
            float(finite_deaths.max()) if finite_deaths.size else 0.0,
            float(diagram.birth.max()) if diagram.birth.size else 0.0,
            1e-9,
        )
        if np.isfinite(diagram.threshold) and diagram.threshold > 0:
            top = max(top, diagram.threshold)
        inf_level = top * 1.08
        ax.plot([0, inf_level], [0, inf_level], color="0.5", lw=0.8, ls="--", gid="diagonal")
        ax.axhline(inf_level, color="0.7", lw=0.6, gid="infinity")
        for k in range(diagram.max_dim + 1):
            iv = diagram.intervals(k)
            if iv.shape[0] == 0:
                continue
            death = np.where(np.isinf(iv[:, 1]), inf_level, iv[:, 1])
            ax.scatter(iv[:, 0], death, s=14, marker=MARKERS[k % len(MARKERS)],
                       color=COLORS[k % len(COLORS)], label=f"$H_{k}$", gid=f"H{k}")
        ax.set_xlim(-0.02 * inf_level, inf_level * 1.04)
        ax.set_ylim(-0.02 * inf_level, inf_level * 1.04)
        ax.set_xlabel("birth")
        ax.set_ylabel("death")
        ax.text(0.02 * inf_level, inf_level, r"$\infty$", va="bottom")
        if diagram.max_dim >= 0 and len(diagram):
            ax.legend(loc="lower right")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return _save(fig, path)


def plot_cloud(points, path, title: Optional[str] = None, highlight: Optional[Sequence[bool]] = None) -> Path:
    """3-D scatter of the first three coordinates (fewer if the cloud is thinner)."""
    pts = np.asarray(points, dtype=np.float64)
    with rc_context(_SVG_RC):
        fig = Figure(figsize=(4.5, 4.5))
        if pts.shape[1] >= 3:
            ax = fig.add_subplot(projection="3d")
            ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=2, color=COLORS[0], gid="points", depthshade=False)
            ax.set_zlabel("x2")
        else:
            ax = fig.add_subplot()
            y = pts[:, 1] if pts.shape[1] > 1 else np.zeros(pts.shape[0])
            ax.scatter(pts[:, 0], y, s=2, color=COLORS[0], gid="points")
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
        if title:
            ax.set_title(title)
    return _save(fig, path)


def plot_projection(projected, path, title: Optional[str] = None) -> Path:
    """First two components as axes, the third (if any) as marker size."""
    pts = np.asarray(projected, dtype=np.float64)
    with rc_context(_SVG_RC):
        fig = Figure(figsize=(4.5, 4.5))
        ax = fig.add_subplot()
        x = pts[:, 0]
        y = pts[:, 1] if pts.shape[1] > 1 else np.zeros_like(x)
        if pts.shape[1] > 2 and pts.shape[0]:
            z = pts[:, 2]
            span = z.max() - z.min()
            size = 1.0 + 12.0 * ((z - z.min()) / span if span > 0 else np.full_like(z, 0.5))
        else:
            size = np.full_like(x, 4.0)
        ax.scatter(x, y, s=size, color=COLORS[0], alpha=0.6, linewidths=0, gid="points")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return _save(fig, path)
