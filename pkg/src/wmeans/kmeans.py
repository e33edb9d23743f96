"""Euclidean K-means (k-means++ seeded Lloyd) and its quantization view.

Quantizing a point cloud with K-means is the same thing as finding a local
solution of the nearest k-atom measure to the empirical measure in squared
W_2; the weights of that measure are the cluster label frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import as_rng
from .measures import DiscreteMeasure

__all__ = ["KmeansResult", "lloyd", "quantize", "kmeans_pp"]

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-8


@dataclass
class KmeansResult:
    centroids: np.ndarray  # (k_eff, d), k_eff <= k
    labels: np.ndarray  # (n,)
    inertia: float  # mean squared distance to assigned centroid
    n_iter: int = 0
    inertia_trace: list[float] = field(default_factory=list)


def kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator,
              sample_weight: np.ndarray | None = None,
              init_centers: np.ndarray | None = None) -> np.ndarray:
    """k-means++ seeding: D^2-weighted sampling of up to k distinct centers.

    With ``init_centers``, picks k *additional* centers whose D^2 sampling
    starts from the distances to the given ones. Stops early when every
    remaining point coincides with a chosen center (all residual D^2 mass is
    zero), so fewer than k centers may be returned.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    wsum = w.sum()
    if wsum <= 0:
        raise ValueError("sample weights must have positive total mass")
    chosen: list[int] = []
    if init_centers is None:
        first = rng.choice(n, p=w / wsum)
        chosen.append(first)
        d2 = ((points - points[first]) ** 2).sum(axis=1)
    else:
        d2 = cdist(points, init_centers, "sqeuclidean").min(axis=1)
    while len(chosen) < k:
        mass = w * d2
        total = mass.sum()
        if total <= 0:
            break
        nxt = rng.choice(n, p=mass / total)
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[np.asarray(chosen, dtype=int)]


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin breaks ties toward the lowest centroid index
    return np.argmin(cdist(points, centroids, "sqeuclidean"), axis=1)


def lloyd(points, k: int, seed=None, max_iter: int = DEFAULT_MAX_ITER,
          tol: float = DEFAULT_TOL, sample_weight=None, rng=None) -> KmeansResult:
    """k-means++ seeded Lloyd iterations, deterministic given the seed.

    Empty clusters are re-seeded to the point currently farthest from its
    assigned centroid. ``tol`` is on the relative inertia decrease. Inertia
    is the (weight-)mean squared distance to the assigned centroid and is
    nonincreasing along ``inertia_trace``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if n == 0:
        raise ValueError("points must be nonempty")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n)
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    rng = as_rng(seed) if rng is None else rng

    centroids = kmeans_pp(points, k, rng, sample_weight=sample_weight)
    k_eff = centroids.shape[0]

    labels = _assign(points, centroids)
    trace: list[float] = []
    prev_inertia = np.inf
    wtot = w.sum()
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        # re-seed empty clusters from the farthest assigned points
        d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
        counts = np.bincount(labels, weights=w, minlength=k_eff)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            order = np.argsort(-d2, kind="stable")
            taken = 0
            for c in empties:
                while taken < n and (d2[order[taken]] == 0 or w[order[taken]] == 0):
                    taken += 1
                if taken >= n:
                    break
                centroids = centroids.copy()
                centroids[c] = points[order[taken]]
                taken += 1
            labels = _assign(points, centroids)
            d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
            counts = np.bincount(labels, weights=w, minlength=k_eff)

        inertia = float((w * d2).sum() / wtot)
        trace.append(inertia)

        new_centroids = centroids.copy()
        for c in range(k_eff):
            mask = labels == c
            cw = counts[c]
            if cw > 0:
                new_centroids[c] = (w[mask, None] * points[mask]).sum(axis=0) / cw
        new_labels = _assign(points, new_centroids)
        if np.array_equal(new_labels, labels) and np.allclose(new_centroids, centroids):
            centroids = new_centroids
            break
        centroids = new_centroids
        labels = new_labels
        if prev_inertia < np.inf and prev_inertia > 0:
            if (prev_inertia - inertia) / prev_inertia < tol:
                break
        elif inertia == 0.0:
            break
        prev_inertia = inertia

    d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
    inertia = float((w * d2).sum() / wtot)
    if not trace or inertia < trace[-1]:
        trace.append(inertia)

    # drop clusters that ended empty (possible when distinct points < k)
    counts = np.bincount(labels, weights=w, minlength=k_eff)
    keep = np.flatnonzero(counts > 0)
    if keep.size < k_eff:
        remap = -np.ones(k_eff, dtype=int)
        remap[keep] = np.arange(keep.size)
        centroids = centroids[keep]
        labels = remap[labels]

    return KmeansResult(centroids, labels, inertia, n_iter, trace)


def quantize(points, k: int, seed=None, rng=None) -> DiscreteMeasure:
    """Best-effort k-atom measure closest to the empirical measure in W_2^2.

    Atoms are the Lloyd centroids and weights the cluster label frequencies.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    res = lloyd(points, k, seed=seed, rng=rng)
    weights = np.bincount(res.labels, minlength=res.centroids.shape[0]).astype(float)
    weights /= weights.sum()
    return DiscreteMeasure(res.centroids, weights)
