"""Deterministic SVG rendering of experiment summaries.

matplotlib embeds timestamps and hashed ids by default; both are pinned
here so that identical inputs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def plot_summary_series(series: list[tuple[str, list[float], list[float]]],
                        path: str | Path, xlabel: str = "", ylabel: str = "",
                        title: str = "",
                        reference: tuple[str, list[float], list[float]] | None = None) -> None:
    """Write a line/scatter plot of (label, xs, ys) series to an SVG file."""
    if not series:
        raise ValueError("nothing to plot: no series")
    with plt.rc_context({"svg.hashsalt": "deanonsim"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, xs, ys in series:
            ax.plot(xs, ys, marker="o", label=label)
        if reference is not None:
            label, xs, ys = reference
            ax.plot(xs, ys, linestyle="--", color="black", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
