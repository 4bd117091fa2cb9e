"""Matplotlib figure rendering for the report paths.

Figures are written next to the delimited/JSON outputs so a run directory is
self-describing: training curve, score histograms by label, and a confusion
matrix heatmap.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport


def save_training_curve(losses: list[float], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(losses) + 1), losses, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean reconstruction MSE")
    ax.set_yscale("log")
    ax.set_title("Autoencoder training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_histogram(scores: list[float], labels: list[int] | None,
                         path: str, title: str = "Anomaly scores") -> None:
    scores_arr = np.asarray(scores, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    if labels is not None:
        lab = np.asarray(labels)
        bins = np.histogram_bin_edges(scores_arr, bins=40)
        ax.hist(scores_arr[lab == 0], bins=bins, alpha=0.6, label="normal (0)")
        ax.hist(scores_arr[lab == 1], bins=bins, alpha=0.6, label="outlier (1)")
        ax.legend()
    else:
        ax.hist(scores_arr, bins=40, alpha=0.8)
    ax.set_xlabel("score")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_figure(report: EvalReport, path: str) -> None:
    cm = report.confusion
    mat = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]], dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.imshow(mat, cmap="Blues")
    for (i, j), v in np.ndenumerate(mat):
        ax.text(j, i, f"{int(v)}", ha="center", va="center",
                color="black" if v < mat.max() / 2 else "white")
    ax.set_xticks([0, 1], ["pred 0", "pred 1"])
    ax.set_yticks([0, 1], ["true 0", "true 1"])
    ax.set_title(f"F1={report.f1:.4f}  P={report.precision:.4f}  "
                 f"R={report.recall:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
