"""Choosing the number of clusters by elbow, silhouette, gap statistic and a
small index vote."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.metrics import calinski_harabasz_score, davies_bouldin_score

from .fcm import FcmConfig, FcmModel, fcm_fit, fcm_membership
from .features import as_matrix

METHODS = ("elbow", "silhouette", "gap", "calinski_harabasz", "davies_bouldin")


@dataclass
class SelectionScores:
    i: int
    wcsd: float
    mean_silhouette: float
    gap: float = float("nan")
    gap_se: float = float("nan")
    calinski_harabasz: float = float("nan")
    davies_bouldin: float = float("nan")
    votes: int = 0
    voters: list[str] = field(default_factory=list)


def wcsd(model: FcmModel, vectors) -> float:
    """Sum of per-coordinate |x - V| over points hard-assigned to each center."""
    x = as_matrix(vectors)
    u = model.memberships if len(model.memberships) == len(x) else fcm_membership(model, x)
    return float(np.abs(x - model.centers[np.argmax(u, axis=1)]).sum())


def silhouette(assignments: Sequence[int], vectors, centers=None) -> tuple[np.ndarray, float]:
    """Per-point silhouette values and their mean.

    ``b`` is the mean distance to the neighbouring cluster: the one whose
    center is closest to the point when ``centers`` is given, else the
    cluster with the smallest mean distance. Points in singleton clusters
    score 0.
    """
    x = as_matrix(vectors)
    labels = np.asarray(assignments)
    if labels.shape[0] != x.shape[0]:
        raise ValueError("one assignment per vector required")
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    d = cdist(x, x)
    idx = np.searchsorted(clusters, labels)
    onehot = np.zeros((x.shape[0], clusters.size))
    onehot[np.arange(x.shape[0]), idx] = 1.0
    sizes = onehot.sum(axis=0)
    sums = d @ onehot  # (n, k) total distance to each cluster
    own = sizes[idx]
    a = np.where(own > 1, sums[np.arange(len(x)), idx] / np.maximum(own - 1, 1), 0.0)
    mean_to = sums / sizes
    if centers is not None:
        cen = np.asarray(centers, dtype=float)[clusters]
        dc = cdist(x, cen)
        dc[np.arange(len(x)), idx] = np.inf
        nb = np.argmin(dc, axis=1)
        b = mean_to[np.arange(len(x)), nb]
    else:
        other = mean_to.copy()
        other[np.arange(len(x)), idx] = np.inf
        b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own <= 1] = 0.0
    return s, float(s.mean())


def _dispersion(x: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for k in np.unique(labels):
        pts = x[labels == k]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def _hard_fit(x: np.ndarray, k: int, seed: int, fcm: FcmConfig) -> np.ndarray:
    if k == 1:
        return np.zeros(x.shape[0], dtype=int)
    model = fcm_fit(x, FcmConfig(c=k, m=fcm.m, max_iters=fcm.max_iters, epsilon=fcm.epsilon,
                                 seed=seed, n_init=fcm.n_init))
    return model.hard_assignments()


@dataclass
class GapResult:
    candidates: list[int]
    gap: np.ndarray
    se: np.ndarray
    chosen: int


def gap_statistic(vectors, candidates: Sequence[int], b_refs: int = 50, seed: int = 0,
                  fcm: FcmConfig | None = None, labels_for: dict[int, np.ndarray] | None = None) -> GapResult:
    """Gap statistic with the 1-SE rule over ascending ``candidates``.

    ``labels_for`` may supply precomputed hard assignments of the data for
    some candidates.
    """
    x = as_matrix(vectors)
    candidates = list(candidates)
    if candidates != sorted(candidates) or not candidates:
        raise ValueError("candidates must be non-empty and ascending")
    if b_refs < 1:
        raise ValueError("b_refs must be positive")
    fcm = fcm or FcmConfig(epsilon=1e-5)
    rng = np.random.default_rng(seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    refs = [rng.uniform(lo, hi, size=x.shape) for _ in range(b_refs)]
    gaps, ses = [], []
    for k in candidates:
        lab = labels_for[k] if labels_for and k in labels_for else _hard_fit(x, k, seed, fcm)
        log_w = np.log(max(_dispersion(x, lab), 1e-300))
        ref_logs = np.array([np.log(max(_dispersion(r, _hard_fit(r, k, seed + b + 1, fcm)), 1e-300))
                             for b, r in enumerate(refs)])
        gaps.append(float(ref_logs.mean() - log_w))
        ses.append(float(ref_logs.std() * np.sqrt(1.0 + 1.0 / b_refs)))
    gap, se = np.array(gaps), np.array(ses)
    chosen = candidates[-1]
    for j in range(len(candidates) - 1):
        if gap[j] >= gap[j + 1] - se[j + 1]:
            chosen = candidates[j]
            break
    return GapResult(candidates, gap, se, chosen)


def elbow_choice(candidates: Sequence[int], wcsd_values: Sequence[float]) -> int:
    """Candidate with the largest second difference of WCSD."""
    w = np.asarray(wcsd_values, dtype=float)
    if len(w) < 3:
        return int(candidates[int(np.argmin(w))]) if len(w) else int(candidates[0])
    second = w[:-2] - 2 * w[1:-1] + w[2:]
    return int(candidates[1 + int(np.argmax(second))])


def method_choices(scores: Sequence[SelectionScores], gap_choice: int | None = None) -> dict[str, int]:
    cands = [s.i for s in scores]
    out = {
        "elbow": elbow_choice(cands, [s.wcsd for s in scores]),
        "silhouette": cands[int(np.nanargmax([s.mean_silhouette for s in scores]))],
    }
    if gap_choice is not None:
        out["gap"] = gap_choice
    ch = [s.calinski_harabasz for s in scores]
    if not np.all(np.isnan(ch)):
        out["calinski_harabasz"] = cands[int(np.nanargmax(ch))]
    db = [s.davies_bouldin for s in scores]
    if not np.all(np.isnan(db)):
        out["davies_bouldin"] = cands[int(np.nanargmin(db))]
    return out


def vote(scores: Sequence[SelectionScores], gap_choice: int | None = None) -> int:
    """Each method votes once; most votes wins and ties go to the smaller i.

    The gap vote comes from ``gap_choice`` when given, else from the
    candidates' own gap/se columns via the 1-SE rule.
    """
    if len(scores) < 2:
        raise ValueError("vote needs at least 2 scored candidates")
    scores = sorted(scores, key=lambda s: s.i)
    if gap_choice is None and not np.isnan(scores[0].gap):
        gap_choice = scores[-1].i
        for a, b in zip(scores, scores[1:]):
            if a.gap >= b.gap - b.gap_se:
                gap_choice = a.i
                break
    choices = method_choices(scores, gap_choice)
    for s in scores:
        s.voters = sorted(name for name, i in choices.items() if i == s.i)
        s.votes = len(s.voters)
    return tally_votes(choices)


def tally_votes(choices: dict[str, int]) -> int:
    """Winner of a plain {method: candidate} vote."""
    tally = Counter(choices.values())
    best = max(tally.values())
    return min(i for i, v in tally.items() if v == best)


@dataclass
class SelectionResult:
    scores: list[SelectionScores]
    chosen: int
    choices: dict[str, int]
    models: dict[int, FcmModel]


def score_candidates(vectors, candidates: Sequence[int], seed: int = 0, b_refs: int = 50,
                     fcm: FcmConfig | None = None) -> SelectionResult:
    """Fit FCM per candidate, score every method and run the vote."""
    x = as_matrix(vectors)
    candidates = sorted(set(int(c) for c in candidates))
    candidates = [c for c in candidates if 2 <= c <= x.shape[0] - 1]
    if len(candidates) < 2:
        raise ValueError("need at least 2 feasible candidates (2 <= i < n)")
    fcm = fcm or FcmConfig(epsilon=1e-5)
    scores, models, labels = [], {}, {}
    for k in candidates:
        model = fcm_fit(x, FcmConfig(c=k, m=fcm.m, max_iters=fcm.max_iters, epsilon=fcm.epsilon,
                                     seed=seed, n_init=fcm.n_init))
        models[k] = model
        lab = model.hard_assignments()
        labels[k] = lab
        used = np.unique(lab)
        if used.size >= 2:
            _, sil = silhouette(lab, x)
            ch = float(calinski_harabasz_score(x, lab))
            db = float(davies_bouldin_score(x, lab))
        else:
            sil, ch, db = -1.0, float("nan"), float("nan")
        scores.append(SelectionScores(k, wcsd(model, x), sil, calinski_harabasz=ch, davies_bouldin=db))
    gap = gap_statistic(x, candidates, b_refs=b_refs, seed=seed, fcm=fcm, labels_for=labels)
    for s, g, e in zip(scores, gap.gap, gap.se):
        s.gap, s.gap_se = float(g), float(e)
    choices = method_choices(scores, gap.chosen)
    chosen = vote(scores, gap.chosen)
    return SelectionResult(scores, chosen, choices, models)
