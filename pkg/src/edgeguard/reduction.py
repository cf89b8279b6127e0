"""Feature pruning: correlation-based selection, class deviation ranges and
post-clustering score comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .features import as_matrix


@dataclass
class CorrelationReport:
    matrix: np.ndarray
    constant: np.ndarray  # bool per feature
    dropped: list[tuple[int, int]] = field(default_factory=list)  # (feature, partner)


def pearson_matrix(vectors) -> CorrelationReport:
    """Pearson R for every feature pair; constant features get R = 0 off the diagonal."""
    x = as_matrix(vectors)
    if x.shape[0] < 2:
        raise ValueError("pearson_matrix needs at least 2 vectors")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    constant = norms == 0
    safe = np.where(constant, 1.0, norms)
    z = centered / safe
    r = np.clip(z.T @ z, -1.0, 1.0)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = (r + r.T) / 2
    np.fill_diagonal(r, np.where(constant, 0.0, 1.0))
    return CorrelationReport(r, constant)


def cfs_prune(report: CorrelationReport, threshold: float = 0.9) -> list[int]:
    """Drop the later feature of each pair with |R| >= threshold.

    Pairs are visited in schema order and a feature that has already been
    dropped cannot doom another one.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    r = np.abs(report.matrix)
    h = r.shape[0]
    dropped: dict[int, int] = {}
    for i in range(h):
        if i in dropped:
            continue
        for j in range(i + 1, h):
            if j not in dropped and r[i, j] >= threshold:
                dropped[j] = i
    report.dropped = sorted(dropped.items())
    return sorted(dropped)


@dataclass
class DeviationReport:
    classes: list[Hashable]
    ranges: np.ndarray  # (n_classes, h, 2) as [f_min, f_max]
    support: np.ndarray  # (n_classes, h) samples inside frequent bins
    remove: np.ndarray  # bool per feature


def _frequent_range(col: np.ndarray, min_support: int, bins: int) -> tuple[float, float, int]:
    idx = np.minimum((col * bins).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    frequent = np.flatnonzero(counts >= min_support)
    if frequent.size == 0:
        return float(col.min()), float(col.max()), int(col.size)
    mask = np.isin(idx, frequent)
    vals = col[mask]
    return float(vals.min()), float(vals.max()), int(mask.sum())


def deviation_report(vectors, labels: Sequence[Hashable], min_support: float = 0.05,
                     tolerance: float = 0.05, bins: int = 20) -> DeviationReport:
    """Per-class ranges of frequent feature values.

    Values are binned into ``bins`` equal-width items over [0, 1]; an item is
    frequent when it holds at least ``min_support`` of the class's samples
    (a fraction below 1, or an absolute count). The class range spans the
    frequent items' values.
    """
    x = np.clip(as_matrix(vectors), 0.0, 1.0)
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise ValueError("one label per vector required")
    classes = sorted(set(labels), key=repr)
    if len(classes) < 2:
        raise ValueError("deviation method requires >=2 classes")
    lab = np.array([classes.index(v) for v in labels])
    h = x.shape[1]
    ranges = np.zeros((len(classes), h, 2))
    support = np.zeros((len(classes), h), dtype=int)
    for ci in range(len(classes)):
        rows = x[lab == ci]
        need = min_support * rows.shape[0] if min_support < 1 else min_support
        need = max(1, int(np.ceil(need)))
        for k in range(h):
            lo, hi, sup = _frequent_range(rows[:, k], need, bins)
            ranges[ci, k] = (lo, hi)
            support[ci, k] = sup
    spread = ranges.max(axis=0) - ranges.min(axis=0)  # (h, 2) per endpoint
    remove = np.all(spread <= tolerance + 1e-12, axis=1)
    return DeviationReport(classes, ranges, support, remove)


def deviation_prune(vectors, labels: Sequence[Hashable], min_support: float = 0.05,
                    tolerance: float = 0.05) -> list[int]:
    """Features whose frequent-value range matches across every class."""
    return np.flatnonzero(deviation_report(vectors, labels, min_support, tolerance).remove).tolist()


def cluster_scores(memberships: np.ndarray, vectors, m: float = 1.0) -> np.ndarray:
    """(c, h) membership-weighted mean of every feature in every cluster."""
    x = as_matrix(vectors)
    w = np.asarray(memberships, dtype=float) ** m
    mass = w.sum(axis=0)
    mass = np.where(mass > 0, mass, 1.0)
    return (w.T @ x) / mass[:, None]


def score_prune(model, schema=None, tolerance: float = 0.02, vectors=None) -> list[int]:
    """Features whose cluster scores all lie within ``tolerance`` of each other.

    Scores are the cluster centers by default, which are the fuzzy-weighted
    feature means; pass ``vectors`` to recompute them from memberships.
    """
    scores = model.centers if vectors is None else cluster_scores(model.memberships, vectors)
    if schema is not None and scores.shape[1] != len(schema):
        raise ValueError("model and schema dimensions differ")
    spread = scores.max(axis=0) - scores.min(axis=0)
    return np.flatnonzero(spread <= tolerance + 1e-12).tolist()
