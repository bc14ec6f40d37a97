"""Figure rendering for CLI reports, written to files next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_fields_figure", "save_series_figure"]


def save_fields_figure(fields, titles, path, suptitle=None):
    """Heatmaps of one or more cell-centered fields, side by side."""
    fields = list(fields)
    titles = list(titles)
    fig, axes = plt.subplots(1, len(fields), figsize=(4.6 * len(fields), 4.0),
                             squeeze=False)
    for ax, field, title in zip(axes[0], fields, titles):
        grid = field.grid
        im = ax.imshow(field.as_2d(), origin="lower",
                       extent=(0.0, grid.lx, 0.0, grid.ly), aspect="auto")
        fig.colorbar(im, ax=ax)
        ax.set_title(title)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_series_figure(x, series: dict, path, xlabel="", ylabel="",
                       logy=False, title=None):
    """Line plot of named series against a shared abscissa."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, values in series.items():
        values = np.asarray(values, dtype=float)
        if logy:
            positive = values > 0
            ax.semilogy(np.asarray(x)[positive], values[positive], label=name)
        else:
            ax.plot(x, values, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
