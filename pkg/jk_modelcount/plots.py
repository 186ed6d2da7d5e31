"""
Figures for JK-ModelCounter

Density trend (schedules against their reference curves) and approximation
quality (estimates against exact counts with the (1 + eps) band). Rendered
off-screen with the Agg backend.
"""

import logging

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .density import fitted_curve, theoretical_curve  # noqa: E402

logger = logging.getLogger(__name__)

FIGURE_SIZE = (6.4, 4.0)


def plot_density_trend(rows, k, path):
    """
    Schedules from density_table rows plus f(i) and g(i), log-scaled.

    Args:
        rows: list of DensityRow
        k: cell-load parameter used by g(i)
        path: output image path
    """
    i = np.array([row.i for row in rows])
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    ax.plot(i, [row.p_solved for row in rows], label="p solved", linewidth=1.5)
    ax.plot(i, [row.p_lsa for row in rows], label="p lsa", linewidth=1.0)
    ax.plot(i, [row.p_theoretical for row in rows], label="p theoretical", linewidth=1.0)
    ax.plot(i, [fitted_curve(x) for x in i], "--", label="f(i) = 1.6 log2(i+1)/i", linewidth=0.8)
    ax.plot(i, [theoretical_curve(x, k) for x in i], ":", label="g(i)", linewidth=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("row i")
    ax.set_ylabel("density p_i")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info("Wrote density trend to %s", path)


def plot_quality(pac_rows, epsilon, path):
    """Every PAC-sweep estimate against its exact count, with the tolerance band."""
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    exact_all = []
    for row in pac_rows:
        exact_all.append(row.exact)
        estimates = [e for e in row.estimates if e > 0]
        ax.scatter([row.exact] * len(estimates), estimates, s=8, alpha=0.6, label=f"{row.instance}/{row.schedule}")
    if exact_all:
        grid = np.geomspace(min(exact_all), max(exact_all), 50)
        ax.plot(grid, grid, "k-", linewidth=0.8)
        ax.plot(grid, grid * (1 + epsilon), "k--", linewidth=0.6)
        ax.plot(grid, grid / (1 + epsilon), "k--", linewidth=0.6)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("exact count")
    ax.set_ylabel("estimate")
    ax.legend(fontsize=5, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info("Wrote approximation quality plot to %s", path)
