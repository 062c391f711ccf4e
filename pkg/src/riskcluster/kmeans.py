"""Lloyd's K-Means with k-means++ seeding and elbow-based choice of K."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveTooShort, DimensionMismatch, TooFewPoints
from .seeding import derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansModel:
    K: int
    centroids: np.ndarray
    assignment: np.ndarray
    wcss: float
    seed: int
    restarts: int
    iterations_run: int
    wcss_history: tuple[float, ...] = field(default=(), repr=False)
    converged: bool = True

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)


@dataclass(frozen=True)
class ElbowCurve:
    ks: tuple[int, ...]
    wcss: tuple[float, ...]

    def __iter__(self):
        return iter(zip(self.ks, self.wcss))


def _nearest(points_t: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid and its squared distance for columns of ``points_t`` (d x n).

    Differences are formed coordinate by coordinate in a fixed order so
    equal distances compare equal; a later centroid wins only when it is
    strictly closer, which gives ties to the lowest index.
    """
    d, n = points_t.shape
    labels = np.zeros(n, dtype=np.intp)
    best = np.empty(n)
    dist = np.empty(n)
    tmp = np.empty(n)
    for k in range(centroids.shape[0]):
        target = best if k == 0 else dist
        np.subtract(points_t[0], centroids[k, 0], out=target)
        target *= target
        for j in range(1, d):
            np.subtract(points_t[j], centroids[k, j], out=tmp)
            tmp *= tmp
            target += tmp
        if k:
            closer = dist < best
            labels[closer] = k
            np.minimum(best, dist, out=best)
    return labels, best


def assign_nearest(centroids: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per point; ties go to the lowest index."""
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if centroids.shape[1] != points.shape[1]:
        raise DimensionMismatch(f"centroids have d={centroids.shape[1]}, points d={points.shape[1]}")
    return _nearest(np.ascontiguousarray(points.T), centroids)[0]


def _kmeans_pp(points_t: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points_t.shape[1]
    centres = [points_t[:, rng.integers(n)]]
    d2 = _nearest(points_t, centres[0][None, :])[1]
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centres.append(points_t[:, idx])
        d2 = np.minimum(d2, _nearest(points_t, points_t[:, idx][None, :])[1])
    return np.array(centres)


def _lloyd(points_t: np.ndarray, init: np.ndarray, max_iter: int):
    K = init.shape[0]
    d = points_t.shape[0]
    centroids = init.copy()
    labels, own = _nearest(points_t, centroids)
    history = [float(own.sum())]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=K)
        sums = np.column_stack([np.bincount(labels, weights=points_t[j], minlength=K) for j in range(d)])
        new = centroids.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        empty = np.nonzero(~nonempty)[0]
        if empty.size:
            # reseed empties at the points worst served by their current centroid
            far = np.argsort(-own, kind="stable")[: empty.size]
            if own[far[0]] > 0:
                new[empty] = points_t[:, far].T
        new_labels, own = _nearest(points_t, new)
        history.append(float(own.sum()))
        changed = not np.array_equal(new_labels, labels)
        centroids, labels = new, new_labels
        if not changed:
            converged = True
            break
    return centroids, labels, history, converged, it


def kmeans_fit(
    points: np.ndarray,
    K: int,
    restarts: int = 10,
    max_iter: int = 300,
    seed: int = 0,
) -> KMeansModel:
    """Best-of-``restarts`` Lloyd's algorithm.

    Each restart draws its own k-means++ seeding from ``derive_seed(seed, r)``
    so the result does not depend on the order restarts run in. Lloyd stops
    at an assignment fixpoint or after ``max_iter`` updates.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] < 1:
        raise DimensionMismatch(f"points must be n x d with d >= 1, got {points.shape}")
    n = points.shape[0]
    if K < 1 or K > n:
        raise TooFewPoints(f"K={K} with {n} points")
    points_t = np.ascontiguousarray(points.T)
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng(derive_seed(seed, "restart", r))
        init = _kmeans_pp(points_t, K, rng)
        centroids, labels, history, converged, iters = _lloyd(points_t, init, max_iter)
        wcss = history[-1]
        if best is None or wcss < best[0]:
            best = (wcss, centroids, labels, history, converged, iters)
    wcss, centroids, labels, history, converged, iters = best
    if K > 1 and np.any(np.bincount(labels, minlength=K) == 0):
        log.warning("K-Means with K=%d left empty clusters (duplicate centroids); input is degenerate", K)
    return KMeansModel(
        K=K,
        centroids=centroids,
        assignment=labels,
        wcss=wcss,
        seed=seed,
        restarts=restarts,
        iterations_run=iters,
        wcss_history=tuple(history),
        converged=converged,
    )


def elbow_scan(points: np.ndarray, k_max: int = 10, restarts: int = 10, seed: int = 0, max_iter: int = 300) -> ElbowCurve:
    n = np.asarray(points).shape[0]
    if k_max > n:
        raise TooFewPoints(f"K_max={k_max} exceeds {n} points")
    ks, ws = [], []
    for K in range(1, k_max + 1):
        model = kmeans_fit(points, K, restarts=restarts, max_iter=max_iter, seed=derive_seed(seed, "elbow", K))
        ks.append(K)
        ws.append(model.wcss)
    return ElbowCurve(tuple(ks), tuple(ws))


def suggest_k(curve: ElbowCurve | list[tuple[int, float]]) -> int:
    """K with the largest second difference of WCSS; ties go to the smaller K."""
    pairs = list(curve)
    if len(pairs) < 3:
        raise CurveTooShort(f"need at least 3 points, got {len(pairs)}")
    ks = [k for k, _ in pairs]
    w = [float(v) for _, v in pairs]
    best_k, best = None, -np.inf
    for i in range(1, len(w) - 1):
        d2 = (w[i - 1] - w[i]) - (w[i] - w[i + 1])
        if d2 > best:
            best_k, best = ks[i], d2
    return best_k
