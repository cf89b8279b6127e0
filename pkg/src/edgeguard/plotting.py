"""PNG figures for the CLI's ``--figures`` option (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import MetricsTable  # noqa: E402
from .selection import SelectionResult  # noqa: E402

_DPI = 110


def _save(fig, out_dir: Path, name: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def plot_selection(selection: SelectionResult, out_dir: Path) -> Path:
    """WCSD, mean silhouette and gap (with one-SE bars) per candidate count."""
    s = selection.scores
    i = [x.i for x in s]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    axes[0].plot(i, [x.wcsd for x in s], "o-")
    axes[0].set_title("WCSD (elbow)")
    axes[1].plot(i, [x.mean_silhouette for x in s], "o-", color="tab:green")
    axes[1].set_title("mean silhouette")
    axes[2].errorbar(i, [x.gap for x in s], yerr=[x.gap_se for x in s], fmt="o-", color="tab:purple", capsize=3)
    axes[2].set_title("gap statistic")
    for ax in axes:
        ax.axvline(selection.chosen, color="grey", linestyle="--", linewidth=1)
        ax.set_xlabel("clusters")
    return _save(fig, out_dir, "selection.png")


def plot_objective(trace: Sequence[float], out_dir: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.plot(np.arange(1, len(trace) + 1), trace)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective J")
    ax.set_yscale("log")
    return _save(fig, out_dir, "objective.png")


def plot_correlation(matrix: np.ndarray, names: Sequence[str], out_dir: Path) -> Path:
    n = len(names)
    size = max(5.0, 0.16 * n + 2)
    fig, ax = plt.subplots(figsize=(size + 1, size))
    im = ax.imshow(matrix, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(n), names, rotation=90, fontsize=5)
    ax.set_yticks(range(n), names, fontsize=5)
    fig.colorbar(im, ax=ax, fraction=0.04, label="Pearson R")
    return _save(fig, out_dir, "correlation.png")


def plot_confusion(table: MetricsTable, out_dir: Path, name: str | None = None) -> Path:
    conf = table.confusion
    k = len(table.classes)
    fig, ax = plt.subplots(figsize=(1.0 + 0.55 * k, 0.8 + 0.5 * k))
    ax.imshow(np.log1p(conf), cmap="Blues")
    short = [c[:10] for c in table.classes]
    ax.set_xticks(range(k), short, rotation=60, ha="right", fontsize=7)
    ax.set_yticks(range(k), short, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("truth")
    peak = conf.max() if conf.size else 0
    for r in range(k):
        for c in range(k):
            if conf[r, c]:
                ax.text(c, r, str(int(conf[r, c])), ha="center", va="center", fontsize=6,
                        color="white" if conf[r, c] > 0.5 * peak else "black")
    return _save(fig, out_dir, name or f"confusion_{table.mode.value}.png")


def plot_feature_cdfs(values: np.ndarray, names: Sequence[str], groups: np.ndarray,
                      out_dir: Path, max_features: int = 12) -> Path:
    """Empirical CDF per feature, one curve per group (e.g. benign/malicious)."""
    shown = list(range(min(len(names), max_features)))
    cols = 4
    rows = max(1, -(-len(shown) // cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.5 * rows), squeeze=False)
    for ax in axes.flat[len(shown):]:
        ax.set_visible(False)
    for ax, j in zip(axes.flat, shown):
        for g in np.unique(groups):
            v = np.sort(values[groups == g, j])
            if v.size:
                ax.step(v, np.arange(1, v.size + 1) / v.size, where="post", label=str(g))
        ax.set_title(names[j], fontsize=8)
        ax.tick_params(labelsize=6)
    axes.flat[0].legend(fontsize=6)
    return _save(fig, out_dir, "feature_cdfs.png")


def plot_cache_series(times: Sequence[float], resident: Sequence[int], sources: Sequence[str],
                      out_dir: Path) -> Path:
    """Resident policies and cumulative classification requests over replay time."""
    t = np.asarray(times, dtype=float)
    t = t - t[0] if t.size else t
    classified = np.cumsum([s == "classified" for s in sources])
    fig, ax = plt.subplots(figsize=(6, 3.4))
    ax.plot(t, resident, label="policies resident")
    ax.plot(t, classified, label="classification requests")
    ax.set_xlabel("seconds")
    ax.legend(fontsize=8)
    return _save(fig, out_dir, "cache.png")
