"""Lloyd's K-means with k-means++ seeding and best-of-restarts selection.

Points are the *columns* of a (dim x n) matrix, matching the layout of the
consensus anchor graph ``S``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import InvalidConfig, InvalidInput, InvalidShape


@dataclass
class KMeansConfig:
    k: int
    restarts: int = 20
    max_iter: int = 300
    tol: float = 1e-7
    seed: int = 0


@dataclass
class KMeansResult:
    labels: np.ndarray            # (n,)
    centroids: np.ndarray         # (dim, k)
    inertia: float
    restart_inertias: List[float]
    restart_labels: List[np.ndarray]
    restart_histories: List[List[float]]  # inertia after every Lloyd step, per restart


def _exact_sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans_plusplus(points, k, rng) -> np.ndarray:
    """Pick ``k`` seed rows of ``points`` (n, dim) by D^2 sampling."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _exact_sq_dists(points, points[chosen]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a seed; take the first unused index
            used = set(chosen)
            idx = next(i for i in range(n) if i not in used)
        chosen.append(idx)
        closest = np.minimum(closest, _exact_sq_dists(points, points[[idx]]).ravel())
    return points[chosen].copy()


def _repair_empty(points, labels, dist, k):
    """Move each empty centroid onto the farthest point of a cluster with spare members."""
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return labels, False
    own = dist[np.arange(len(labels)), labels]
    # stable sort: equal distances resolve to the lowest point index
    order = np.argsort(-own, kind="stable")
    labels = labels.copy()
    pos = 0
    for j in empty:
        while counts[labels[order[pos]]] <= 1:
            pos += 1
        i = order[pos]
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] += 1
        pos += 1
    return labels, True


def _centroids(points, labels, k):
    dim = points.shape[1]
    sums = np.zeros((k, dim))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=k)
    return sums / counts[:, None]


def _lloyd(points, cfg, rng):
    k = cfg.k
    centroids = kmeans_plusplus(points, k, rng)
    var_scale = float(np.mean(np.var(points, axis=0)))
    labels = None
    history = []
    settled = False
    for _ in range(cfg.max_iter):
        dist = _exact_sq_dists(points, centroids)
        nearest = np.argmin(dist, axis=1)
        full = np.bincount(nearest, minlength=k).min() > 0
        if labels is not None and full and (settled or np.array_equal(nearest, labels)):
            labels = nearest
            break
        labels, _ = _repair_empty(points, nearest, dist, k)
        new_centroids = _centroids(points, labels, k)
        settled = float(np.sum((new_centroids - centroids) ** 2)) <= cfg.tol * var_scale
        centroids = new_centroids
        history.append(float(np.sum((points - centroids[labels]) ** 2)))
    else:
        # iteration cap: still report nearest-centroid labels when no cluster empties
        nearest = np.argmin(_exact_sq_dists(points, centroids), axis=1)
        if np.bincount(nearest, minlength=k).min() > 0:
            labels = nearest
    inertia = float(np.sum((points - centroids[labels]) ** 2))
    if inertia != history[-1]:
        history.append(inertia)
    return labels, centroids, history


def kmeans_fit(points, cfg: KMeansConfig) -> KMeansResult:
    """Best-inertia K-means over ``cfg.restarts`` independently seeded runs.

    Restart ``r`` draws from the ``r``-th child of ``SeedSequence(cfg.seed)``.
    Ties in inertia go to the lowest restart index.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidShape(f"points must be a (dim, n) matrix, got ndim={points.ndim}")
    if not np.all(np.isfinite(points)):
        raise InvalidInput("points contain non-finite entries")
    n = points.shape[1]
    if not 1 <= cfg.k <= n:
        raise InvalidConfig(f"k={cfg.k} must lie in [1, n={n}]")
    if cfg.restarts < 1 or cfg.max_iter < 1 or cfg.tol < 0:
        raise InvalidConfig("restarts and max_iter must be >= 1 and tol >= 0")
    rows = np.ascontiguousarray(points.T)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    runs = [_lloyd(rows, cfg, np.random.default_rng(child)) for child in children]

    inertias = [h[-1] for _, _, h in runs]
    best = int(np.argmin(inertias))
    labels, centroids, _ = runs[best]
    return KMeansResult(
        labels=labels,
        centroids=centroids.T.copy(),
        inertia=inertias[best],
        restart_inertias=inertias,
        restart_labels=[r[0] for r in runs],
        restart_histories=[r[2] for r in runs],
    )
