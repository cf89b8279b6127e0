"""Fuzzy C-means clustering."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .features import as_matrix


@dataclass(frozen=True)
class FcmConfig:
    c: int = 2
    m: float = 2.0
    max_iters: int = 300
    epsilon: float = 1e-6
    seed: int = 0
    n_init: int = 1  # restarts; the lowest final objective wins
    literal_exponent: bool = False  # use 2*(m-1) instead of 2/(m-1)

    def __post_init__(self) -> None:
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if not self.m > 1:
            raise ValueError("fuzziness index m must be > 1")
        if self.max_iters < 1 or self.epsilon <= 0 or self.n_init < 1:
            raise ValueError("max_iters, epsilon and n_init must be positive")

    @property
    def exponent(self) -> float:
        return 2.0 * (self.m - 1.0) if self.literal_exponent else 2.0 / (self.m - 1.0)


@dataclass
class FcmModel:
    centers: np.ndarray  # (c, h)
    memberships: np.ndarray  # (n, c)
    objective_trace: list[float]
    config: FcmConfig
    n_iter: int = 0
    converged: bool = False
    empty_clusters: list[int] = field(default_factory=list)

    @property
    def c(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def hard_assignments(self) -> np.ndarray:
        return np.argmax(self.memberships, axis=1)


def _sq_distances(centers: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(n, c) squared Euclidean distances."""
    d2 = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def _distances(centers: np.ndarray, x: np.ndarray) -> np.ndarray:
    # exact differences keep the zero-distance test reliable
    return np.sqrt(((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1))


def memberships_for(centers: np.ndarray, x: np.ndarray, m: float = 2.0,
                    literal_exponent: bool = False) -> np.ndarray:
    """Membership of every row of ``x`` in each cluster, given frozen centers."""
    p = 2.0 * (m - 1.0) if literal_exponent else 2.0 / (m - 1.0)
    d = _distances(centers, x)
    zero = d == 0.0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # 1 / sum_k (d_i / d_k)^p  ==  d_i^-p / sum_k d_k^-p, computed stably
        logd = np.log(np.where(zero, 1.0, d))
        lw = -p * logd
        lw -= lw.max(axis=1, keepdims=True)
        w = np.exp(lw)
        u = w / w.sum(axis=1, keepdims=True)
    hit = zero.any(axis=1)
    if hit.any():
        z = zero[hit].astype(float)
        u[hit] = z / z.sum(axis=1, keepdims=True)
    return u


def _centers(u: np.ndarray, x: np.ndarray, m: float) -> np.ndarray:
    w = u ** m
    mass = w.sum(axis=0)
    mass = np.where(mass > 0, mass, 1.0)
    return (w.T @ x) / mass[:, None]


def _objective(u: np.ndarray, centers: np.ndarray, x: np.ndarray, m: float) -> float:
    return float(((u ** m) * _sq_distances(centers, x)).sum())


def _initial_memberships(n: int, c: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(size=(n, c))
    return u / u.sum(axis=1, keepdims=True)


def _canonical(model: FcmModel) -> FcmModel:
    order = np.lexsort(model.centers.T[::-1])
    if np.array_equal(order, np.arange(model.c)):
        return model
    return replace(model, centers=model.centers[order], memberships=model.memberships[:, order],
                   empty_clusters=sorted(int(np.flatnonzero(order == k)[0]) for k in model.empty_clusters))


def _fit_once(x: np.ndarray, config: FcmConfig, u: np.ndarray, callback=None) -> FcmModel:
    m = config.m
    trace: list[float] = []
    converged = False
    it = 0
    centers = _centers(u, x, m)
    for it in range(1, config.max_iters + 1):
        centers = _centers(u, x, m)
        trace.append(_objective(u, centers, x, m))
        u_new = memberships_for(centers, x, m, config.literal_exponent)
        delta = float(np.abs(u_new - u).max())
        u = u_new
        if callback is not None:
            callback(it, u, centers)
        if delta < config.epsilon:
            converged = True
            break
    mass = u.sum(axis=0)
    empty = np.flatnonzero(mass < 1e-9 * max(1, x.shape[0])).tolist()
    return FcmModel(centers, u, trace, config, it, converged, empty)


def fcm_fit(vectors, config: FcmConfig | None = None, *, init_memberships=None,
            callback=None) -> FcmModel:
    """Alternate center and membership updates until max |delta u| < epsilon.

    Memberships stored on the model are those evaluated against the final
    centers, so ``fcm_membership`` replays them exactly. Clusters come back
    ordered by lexicographic center order. ``callback(iteration, u, centers)``
    observes every iteration.
    """
    config = config or FcmConfig()
    x = as_matrix(vectors)
    n = x.shape[0]
    if n < config.c:
        raise ValueError(f"need at least c={config.c} vectors, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vectors contain non-finite values")
    if init_memberships is not None:
        u0 = np.asarray(init_memberships, dtype=float)
        if u0.shape != (n, config.c):
            raise ValueError("init_memberships must be (n, c)")
        return _canonical(_fit_once(x, config, u0 / u0.sum(axis=1, keepdims=True), callback))
    rng = np.random.default_rng(config.seed)
    best: FcmModel | None = None
    for _ in range(config.n_init):
        model = _fit_once(x, config, _initial_memberships(n, config.c, rng), callback)
        final = model.objective_trace[-1]
        if best is None or final < best.objective_trace[-1] - 1e-12:
            best = model
    assert best is not None
    return _canonical(best)


def fcm_membership(model: FcmModel, x) -> np.ndarray:
    """Membership row (or rows, for a matrix) against the model's frozen centers."""
    arr = np.asarray(getattr(x, "values", x), dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != model.dim:
        raise ValueError(f"expected dimension {model.dim}, got {arr.shape[1]}")
    u = memberships_for(model.centers, arr, model.config.m, model.config.literal_exponent)
    return u[0] if single else u


def fcm_objective(model: FcmModel, vectors, memberships=None) -> float:
    """J = sum_i sum_j u_ij^m ||V_i - X_j||^2 (memberships default to frozen-center ones)."""
    x = as_matrix(vectors)
    if x.shape[1] != model.dim:
        raise ValueError(f"expected dimension {model.dim}, got {x.shape[1]}")
    u = fcm_membership(model, x) if memberships is None else np.asarray(memberships, dtype=float)
    d2 = _distances(model.centers, x) ** 2
    return float(((u ** model.config.m) * d2).sum())
