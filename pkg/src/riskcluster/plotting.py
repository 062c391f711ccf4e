"""Report figures: elbow curve, ROC curves and cluster scatter."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.5,
    "savefig.dpi": 120,
    "svg.hashsalt": "riskcluster",
}


def _save(fig, path: Path) -> None:
    # no Software/date metadata so identical runs give identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_elbow(ks, wcss, path, chosen_k: int | None = None) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ks, wcss, marker="o", color="0.2")
        if chosen_k is not None:
            i = list(ks).index(chosen_k)
            ax.plot([chosen_k], [wcss[i]], marker="o", markersize=10, mfc="none", color="tab:red")
        ax.set_xlabel("Number of clusters K")
        ax.set_ylabel("Within-cluster sum of squares")
        ax.set_xticks(list(ks))
        ax.set_title("Elbow curve")
        _save(fig, Path(path))


def plot_roc(curves: dict, path, title: str = "ROC curves") -> None:
    """``curves`` maps a legend label to ``(fpr, tpr, auc)``."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        ax.plot([0, 1], [0, 1], ls="--", color="0.6", lw=1)
        for label, (fpr, tpr, auc) in curves.items():
            ax.plot(fpr, tpr, label=f"{label} (AUC {auc:.2f})")
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
        ax.legend(loc="lower right", frameon=False)
        ax.set_title(title)
        _save(fig, Path(path))


def plot_clusters(scores: np.ndarray, labels: np.ndarray, path, max_points: int = 5000) -> None:
    """Scatter of the first principal-component scores coloured by cluster.

    Large inputs are thinned to an evenly spaced subset so the file stays small.
    """
    n = scores.shape[0]
    keep = np.linspace(0, n - 1, min(n, max_points)).astype(int)
    s, lab = scores[keep], labels[keep]
    with plt.rc_context(STYLE):
        if s.shape[1] >= 3:
            fig = plt.figure(figsize=(6.0, 5.0))
            ax = fig.add_subplot(projection="3d")
            for c in np.unique(lab):
                m = lab == c
                ax.scatter(s[m, 0], s[m, 1], s[m, 2], s=3, alpha=0.5, label=f"cluster {c + 1}")
            ax.set_zlabel("PC3")
        else:
            fig, ax = plt.subplots()
            y = s[:, 1] if s.shape[1] > 1 else np.zeros(len(s))
            for c in np.unique(lab):
                m = lab == c
                ax.scatter(s[m, 0], y[m], s=3, alpha=0.5, label=f"cluster {c + 1}")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        ax.legend(markerscale=4, frameon=False)
        ax.set_title("K-Means clusters on principal components")
        _save(fig, Path(path))
