"""Figure rendering for the command-line reports.

All figures are written straight to files through the Agg backend; nothing
here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_GROUP_COLORS = ["#c44e52", "#55a868", "#4c72b0", "#ccb974", "#8172b2", "#64b5cd"]


def save_elbo_trace(trace, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(trace) + 1), trace, marker=".", color="#4c72b0")
    ax.set_xlabel("iteration")
    ax.set_ylabel("ELBO")
    ax.set_title("Lower-bound trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_icl_trace(icls, ks, path: str | Path) -> None:
    """ICL of the accepted model after each search move."""
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = np.arange(len(icls))
    ax.plot(steps, icls, marker="o", color="#55a868")
    for x, (icl, k) in enumerate(zip(icls, ks)):
        ax.annotate(
            "(" + ",".join(map(str, k)) + ")",
            (x, icl),
            textcoords="offset points",
            xytext=(0, 6),
            fontsize=7,
            ha="center",
        )
    ax.set_xlabel("accepted move")
    ax.set_ylabel("ICL")
    ax.set_title("Model-search path")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ari_bars(group_names, aris, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = np.arange(len(group_names))
    ax.bar(xs, aris, color=[_GROUP_COLORS[i % len(_GROUP_COLORS)] for i in xs])
    ax.set_xticks(xs)
    ax.set_xticklabels(group_names, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("adjusted Rand index")
    ax.set_title("Clustering agreement with the truth")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_bars(names, errors, path: str | Path) -> None:
    """Signed per-parameter estimation errors after alignment."""
    fig, ax = plt.subplots(figsize=(max(5, 0.3 * len(names)), 4))
    xs = np.arange(len(names))
    ax.bar(xs, errors, color="#4c72b0")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=90, fontsize=6)
    ax.set_ylabel("estimate - truth")
    ax.set_title("Connection-parameter recovery")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mesoscopic(
    nodes, edges, path: str | Path, directed_pairs: set[int] | None = None
) -> None:
    """Block-level summary figure.

    ``nodes`` are dicts with group, block, name, mass; ``edges`` are dicts
    with endpoints (group, block), weight and pair index.  Groups are laid
    out as columns, blocks stacked vertically, disc area proportional to
    cluster mass and line width proportional to the connection parameter.
    """
    directed_pairs = directed_pairs or set()
    groups = sorted({n["group"] for n in nodes})
    per_group = {g: [n for n in nodes if n["group"] == g] for g in groups}
    coords = {}
    fig, ax = plt.subplots(figsize=(2.2 * max(len(groups), 2), 5))
    max_mass = max((n["mass"] for n in nodes), default=1.0) or 1.0
    for gx, g in enumerate(groups):
        blocks = per_group[g]
        for bi, node in enumerate(blocks):
            y = -(bi - (len(blocks) - 1) / 2.0) * 1.6
            coords[(node["group"], node["block"])] = (2.5 * gx, y)
    for edge in edges:
        x0, y0 = coords[edge["from"]]
        x1, y1 = coords[edge["to"]]
        style = "-" if edge["pair"] not in directed_pairs else "->"
        width = 0.5 + 6.0 * edge["weight"]
        if style == "-":
            ax.plot([x0, x1], [y0, y1], color="#777777", linewidth=width, zorder=1,
                    alpha=0.8, solid_capstyle="round")
        else:
            rad = 0.25 if edge["from"] != edge["to"] else 0.6
            ax.annotate(
                "",
                xy=(x1, y1),
                xytext=(x0, y0),
                arrowprops=dict(
                    arrowstyle="-|>",
                    color="#777777",
                    lw=width,
                    alpha=0.8,
                    connectionstyle=f"arc3,rad={rad}",
                ),
                zorder=1,
            )
    for (g, b), (x, y) in coords.items():
        node = next(n for n in nodes if n["group"] == g and n["block"] == b)
        gi = groups.index(g)
        radius = 0.15 + 0.45 * np.sqrt(node["mass"] / max_mass)
        circle = plt.Circle(
            (x, y), radius, color=_GROUP_COLORS[gi % len(_GROUP_COLORS)], zorder=2
        )
        ax.add_patch(circle)
        ax.text(x, y, node["name"], ha="center", va="center", fontsize=7, zorder=3)
    ax.set_xlim(-1.5, 2.5 * len(groups) - 1.0)
    ax.relim()
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title("Block-level summary")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
