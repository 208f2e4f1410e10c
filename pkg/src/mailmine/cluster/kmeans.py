"""Lloyd k-means with caller-supplied initial centroids.

Centroid recomputation is the arithmetic mean. Empty clusters are repaired
by reseeding with the point currently farthest from its assigned centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator

from ..errors import ContractError
from .hierarchy import FlatClustering
from .validation import check_vectors


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    initial_centroids: np.ndarray
    max_iterations: int = 100
    convergence_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be >= 1")
        if self.convergence_epsilon <= 0:
            raise ContractError("convergence_epsilon must be > 0")
        if np.asarray(self.initial_centroids).shape[0] != self.k:
            raise ContractError("need exactly k initial centroids")


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iterations: int
    objective_trace: tuple[float, ...]

    def flat(self, ids: list[int]) -> FlatClustering:
        return FlatClustering(
            assignments={i: int(c) for i, c in zip(ids, self.labels)}, k=self.centroids.shape[0]
        )


def _distances(X: np.ndarray, centroids: np.ndarray, metric) -> np.ndarray:
    if metric == "euclidean":
        return cdist(X, centroids)
    return np.array([[metric(x, c) for c in centroids] for x in X])


def kmeans(vectors: np.ndarray, cfg: KMeansConfig, metric="euclidean") -> KMeansResult:
    """Run Lloyd iterations until assignments stabilize or centroids converge."""
    X = check_vectors(vectors)
    n = X.shape[0]
    if cfg.k > n:
        raise ContractError(f"k={cfg.k} exceeds the number of vectors ({n})")
    centroids = np.array(cfg.initial_centroids, dtype=float)
    if centroids.shape[1] != X.shape[1]:
        raise ContractError("centroid dimensionality does not match the vectors")

    labels = np.full(n, -1, dtype=int)
    trace: list[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        dist = _distances(X, centroids, metric)
        new_labels = np.argmin(dist, axis=1)

        # repair empty clusters: steal the worst-fitting point
        for c in range(cfg.k):
            if np.any(new_labels == c):
                continue
            assigned = dist[np.arange(n), new_labels]
            donors = np.array(
                [i for i in range(n) if np.sum(new_labels == new_labels[i]) > 1]
            )
            if donors.size == 0:
                break
            worst = donors[np.argmax(assigned[donors])]
            new_labels[worst] = c

        trace.append(float(np.sum(dist[np.arange(n), new_labels] ** 2)))

        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        new_centroids = centroids.copy()
        for c in range(cfg.k):
            members = X[labels == c]
            if members.shape[0]:
                new_centroids[c] = members.mean(axis=0)
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if not changed or shift < cfg.convergence_epsilon:
            break

    final = _distances(X, centroids, metric)
    inertia = float(np.sum(final[np.arange(n), labels] ** 2))
    return KMeansResult(
        labels=labels,
        centroids=centroids,
        inertia=inertia,
        n_iterations=iterations,
        objective_trace=tuple(trace),
    )


class SeededKMeans(BaseEstimator):
    """sklearn-style estimator around the seeded Lloyd loop."""

    def __init__(self, n_clusters: int = 2, init: np.ndarray | None = None,
                 max_iter: int = 100, tol: float = 1e-6):
        self.n_clusters = n_clusters
        self.init = init
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_vectors(X)
        init = self.init
        if init is None:
            init = X[: self.n_clusters]
        cfg = KMeansConfig(
            k=self.n_clusters,
            initial_centroids=np.asarray(init, dtype=float),
            max_iterations=self.max_iter,
            convergence_epsilon=self.tol,
        )
        result = kmeans(X, cfg)
        self.labels_ = result.labels
        self.cluster_centers_ = result.centroids
        self.inertia_ = result.inertia
        self.n_iter_ = result.n_iterations
        return self

    def predict(self, X):
        X = check_vectors(X)
        return np.argmin(cdist(X, self.cluster_centers_), axis=1)

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_
