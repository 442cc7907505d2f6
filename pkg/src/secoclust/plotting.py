"""Figures written next to the CSV reports of the command-line runs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}

# fixed metadata keeps repeated runs byte-identical
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_tau_curve(curve, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(curve.grid, curve.loss, "o-", color="black", ms=3)
        ax.axvline(curve.best_tau, color="grey", ls="--", lw=0.8)
        ax.set_xlabel(r"threshold $\tau$")
        ax.set_ylabel(r"$L(\tau)$")
        ax.set_title(f"best tau = {curve.best_tau:g}")
        return _save(fig, path)


def plot_seco_matrix(entries, path, partition=None) -> Path:
    """Heatmap of the normalised SECO matrix, reordered by cluster if given."""
    m = np.asarray(entries)
    order = np.arange(m.shape[0])
    if partition is not None:
        order = np.array([g for c in partition.clusters for g in c])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(m[np.ix_(order, order)], vmin=0, vmax=1, cmap="viridis", interpolation="nearest")
        if partition is not None:
            edge = 0
            for c in partition.clusters:
                ax.add_patch(plt.Rectangle((edge - 0.5, edge - 0.5), len(c), len(c),
                                           fill=False, ec="white", lw=0.8))
                edge += len(c)
        fig.colorbar(im, ax=ax, shrink=0.8)
        ax.set_xticks([])
        ax.set_yticks([])
        return _save(fig, path)


def plot_bounds(rows, path) -> Path:
    n = [r["n"] for r in rows]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3))
        for ax, key, bound, label in (
            (axes[0], "eks", "eks_bound", "exceedance estimator"),
            (axes[1], "mad", "mad_bound", "madogram estimator"),
        ):
            ax.plot(n, [r["theta_true"] for r in rows], "o", color="grey", ms=3, label="true value d")
            ax.plot(n, [r[key] for r in rows], "o", color="black", ms=3, label="estimate")
            ax.plot(n, [r[bound] for r in rows], "-", color="black", lw=0.7, label="upper bound")
            ax.set_yscale("log")
            ax.set_xlabel("n")
            ax.set_title(label)
        axes[0].set_ylabel("extremal coefficient")
        axes[0].legend(frameon=False)
        return _save(fig, path)


def plot_levelsets(rows, path) -> Path:
    """SECO as a function of the first child parameter, one line per mother value,
    along the diagonal child_a == child_b."""
    diag = [r for r in rows if r["child_a"] == r["child_b"]]
    keys = [k for k in rows[0] if k.startswith("seco@")]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        x = [r["child_a"] for r in diag]
        for key in keys:
            ax.plot(x, [r[key] for r in diag], lw=1, label=key.replace("seco@", "mother "))
        ax.set_xlabel("child parameter (both groups)")
        ax.set_ylabel("SECO")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_silhouette(table, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot([k for k, _ in table], [s for _, s in table], "o-", color="black", ms=3)
        ax.set_xlabel("number of clusters K")
        ax.set_ylabel("average silhouette")
        return _save(fig, path)
