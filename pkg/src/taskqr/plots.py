"""Figure rendering for the benchmark subcommands.

Each report path that writes a CSV can also render the matching figure next
to it: a per-scheduler heatmap for the chunk-parameter sweep and line plots
for the size-scaling and thread-scaling runs.  Rendering is file-only (Agg
backend); nothing here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["sweep_heatmap", "scale_lines", "throughput_lines"]

_SCHEDULER_STYLE = {
    "barrier": ("tab:green", "o"),
    "lockfree": ("tab:red", "s"),
    "priority": ("tab:blue", "^"),
}


def sweep_heatmap(rows: list[dict], path) -> None:
    """One heatmap per scheduler over the (alpha, beta) grid, best cell marked."""
    schedulers = sorted({r["scheduler"] for r in rows})
    fig, axes = plt.subplots(1, len(schedulers), figsize=(6 * len(schedulers), 5), squeeze=False)
    for ax, sched in zip(axes[0], schedulers):
        sub = [r for r in rows if r["scheduler"] == sched]
        alphas = sorted({r["alpha"] for r in sub})
        betas = sorted({r["beta"] for r in sub})
        grid = np.full((len(betas), len(alphas)), np.nan)
        for r in sub:
            grid[betas.index(r["beta"]), alphas.index(r["alpha"])] = r["median_seconds"]
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        best = min(sub, key=lambda r: r["median_seconds"])
        ax.plot(
            alphas.index(best["alpha"]), betas.index(best["beta"]),
            marker="*", markersize=14, color="white", markeredgecolor="black",
        )
        ax.set_xticks(range(len(alphas)), [str(a) for a in alphas])
        ax.set_yticks(range(len(betas)), [str(b) for b in betas])
        ax.set_xlabel("pivots per diagonal task (alpha)")
        ax.set_ylabel("rows per trailing task (beta)")
        ax.set_title(f"{sched}: median seconds (star = best)")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _line_plot(rows, x_key, x_label, path, logy=False):
    fig, ax = plt.subplots(figsize=(7, 5))
    for sched in sorted({r["scheduler"] for r in rows}):
        sub = sorted((r for r in rows if r["scheduler"] == sched), key=lambda r: r[x_key])
        color, marker = _SCHEDULER_STYLE.get(sched, ("tab:gray", "x"))
        ax.plot(
            [r[x_key] for r in sub],
            [r["median_seconds"] for r in sub],
            color=color, marker=marker, label=sched,
        )
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel("median seconds")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def scale_lines(rows: list[dict], path) -> None:
    """Median seconds versus matrix size, one line per scheduler."""
    _line_plot(rows, "size", "matrix size", path)


def throughput_lines(rows: list[dict], path) -> None:
    """Median seconds versus worker count, one line per scheduler."""
    _line_plot(rows, "threads", "threads", path, logy=True)
