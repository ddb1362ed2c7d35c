"""K-Means segmentation of assets.

Each asset is described by a feature row (by default its row of the return
correlation matrix) and grouped with Lloyd's algorithm seeded by k-means++.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DataError, PreconditionError
from .market_data import DescriptiveStats

FeatureKind = Literal["correlation_rows", "raw_stats"]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    tickers: tuple[str, ...]
    features: np.ndarray
    feature_kind: FeatureKind = "correlation_rows"

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=float)
        if f.ndim != 2 or f.shape[0] != len(self.tickers):
            raise PreconditionError("feature rows must match ticker count")
        if not np.all(np.isfinite(f)):
            raise DataError("features must be finite")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "features", f)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    iterations_run: int
    # inertia after each (assign, update) pass of the winning restart
    inertia_trace: tuple[float, ...] = field(default=())
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "inertia": self.inertia,
            "iterations": self.iterations_run,
            "converged": self.converged,
            "assignments": [int(a) for a in self.assignments],
            "centroids": [[float(x) for x in row] for row in self.centroids],
        }


def build_features(stats: DescriptiveStats, kind: FeatureKind = "correlation_rows") -> FeatureMatrix:
    if kind == "correlation_rows":
        return FeatureMatrix(stats.tickers, np.array(stats.correlation), kind)
    if kind == "raw_stats":
        raw = np.column_stack([stats.mean, stats.std])
        centered = raw - raw.mean(axis=0)
        if len(raw) > 1:
            scale = raw.std(axis=0, ddof=1)
            scale[scale == 0] = 1.0
            centered = centered / scale
        return FeatureMatrix(stats.tickers, centered, kind)
    raise PreconditionError(f"unknown feature kind {kind!r}")


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _inertia(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    diff = x - centroids[labels]
    return float(np.einsum("nd,nd->", diff, diff))


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(x, x[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen centre; take the first unused index
            idx = next(i for i in range(n) if i not in chosen)
        else:
            idx = int(rng.choice(n, p=closest / total))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(x, x[[idx]])[:, 0])
    return x[chosen].copy()


def _update(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Recompute means, repairing empty clusters with the farthest reassignable point."""
    k = len(centroids)
    labels_counts = np.bincount(labels, minlength=k)
    new = np.array(centroids, copy=True)
    for j in range(k):
        if labels_counts[j]:
            new[j] = x[labels == j].mean(axis=0)
    for j in np.flatnonzero(labels_counts == 0):
        d = np.einsum("nd,nd->n", x - new[labels], x - new[labels])
        donors = labels_counts[labels] > 1
        d[~donors] = -1.0
        i = int(np.argmax(d))
        old = labels[i]
        labels[i] = j
        labels_counts[old] -= 1
        labels_counts[j] += 1
        new[j] = x[i]
        new[old] = x[labels == old].mean(axis=0)
    return new


def _lloyd(x: np.ndarray, init: np.ndarray, max_iter: int, tol: float):
    centroids = init
    trace: list[float] = []
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # argmin picks the lowest index on ties
        labels = np.argmin(_sq_dists(x, centroids), axis=1)
        new = _update(x, labels, centroids)
        trace.append(_inertia(x, new, labels))
        shift = float(np.sqrt(np.max(np.sum((new - centroids) ** 2, axis=1))))
        centroids = new
        if shift <= tol:
            converged = True
            break
    return centroids, labels, trace, it, converged


def kmeans_fit(
    features: FeatureMatrix,
    k: int = 3,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_init: int = 10,
) -> ClusterModel:
    """Best-of-``n_init`` Lloyd runs by inertia (ties keep the earliest restart)."""
    x = features.features
    n = len(x)
    if k <= 0:
        raise PreconditionError(f"k must be positive, got {k}")
    if k > n:
        raise PreconditionError(f"k={k} exceeds the number of assets ({n})")
    if max_iter < 1 or n_init < 1 or tol < 0:
        raise PreconditionError("max_iter and n_init must be >= 1 and tol >= 0")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = _kmeans_pp(x, k, rng)
        centroids, labels, trace, it, converged = _lloyd(x, init, max_iter, tol)
        inertia = _inertia(x, centroids, labels)
        if best is None or inertia < best[0]:
            best = (inertia, centroids, labels, trace, it, converged)
    inertia, centroids, labels, trace, it, converged = best
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=labels.astype(int),
        inertia=inertia,
        seed=seed,
        iterations_run=it,
        inertia_trace=tuple(trace),
        converged=converged,
    )


def cluster_members(model: ClusterModel, tickers: Sequence[str]) -> dict[int, list[str]]:
    if len(model.assignments) != len(tickers):
        raise PreconditionError("assignments and tickers differ in length")
    groups: dict[int, list[str]] = {j: [] for j in range(model.k)}
    for t, a in zip(tickers, model.assignments):
        groups[int(a)].append(t)
    return groups
