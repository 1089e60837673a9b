"""PCA feature extraction plus k-means: the comparison clustering route.

Used to benchmark the mixture approach against the standard
feature-then-cluster recipe: project the curves on the leading
principal components (four by default) and run multi-start k-means on
the scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError
from .waves import as_matrix


@dataclass
class PCAProjection:
    """Centered principal-component basis and projected scores."""

    mean: np.ndarray
    components: np.ndarray  # (q, p), orthonormal rows
    scores: np.ndarray  # (n, q)
    explained_variance: np.ndarray  # (q,), non-increasing
    total_variance: float

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance

    def reconstruct(self) -> np.ndarray:
        return self.mean + self.scores @ self.components


def pca(signals, q: int = 4) -> PCAProjection:
    """Project curves on the top-q principal components.

    The sample covariance of the centered data is diagonalized with a
    symmetric eigensolver; each component's largest-magnitude entry is
    made positive so the basis is reproducible.

    Raises
    ------
    ValueError
        If q exceeds min(n, p) or the numerical rank of the data.
    """
    X = as_matrix(signals)
    n, p = X.shape
    if not 1 <= q <= min(n, p):
        raise ValueError(f"q must lie in [1, min(n, p)] = [1, {min(n, p)}]")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    eigvals = np.clip(eigvals, 0.0, None)
    rank = int((eigvals > eigvals[0] * 1e-12).sum()) if eigvals[0] > 0 else 0
    if q > rank:
        raise ValueError(f"q={q} exceeds the numerical rank {rank} of the data")
    components = eigvecs[:, :q].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    scores = centered @ components.T
    return PCAProjection(mean=mean, components=components, scores=scores,
                         explained_variance=eigvals[:q],
                         total_variance=float(eigvals.sum()))


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centroids[j] = X[idx]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    """One k-means run; returns (labels, centroids, list of per-iteration WSS)."""
    centroids = _kmeanspp_init(X, k, rng)
    labels = np.full(X.shape[0], -1)
    wss_history = []
    for _ in range(max_iter):
        sq = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(sq, axis=1)
        wss_history.append(float(sq[np.arange(X.shape[0]), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if members.shape[0] > 0:
                centroids[j] = members.mean(axis=0)
            else:
                # revive on the point farthest from its current centroid
                worst = int(np.argmax(sq[np.arange(X.shape[0]), labels]))
                centroids[j] = X[worst]
    return labels, centroids, wss_history


def kmeans(scores, k: int, n_starts: int = 10, seed: int = 0):
    """Multi-start k-means with k-means++ seeding.

    Parameters
    ----------
    scores : (n, q) feature matrix
    k : int, number of clusters (n > k required)
    n_starts : int
        Independent restarts; the lowest within-cluster sum of squares
        wins (ties: lowest run index).
    seed : int

    Returns
    -------
    (labels, centroids, within_ss)
    """
    X = np.atleast_2d(np.asarray(scores, dtype=float))
    if X.shape[0] <= k:
        raise InsufficientDataError(f"need more than k={k} points, got {X.shape[0]}")
    if k < 1:
        raise ValueError("k must be >= 1")
    best = None
    for seq in np.random.SeedSequence(seed).spawn(n_starts):
        labels, centroids, history = _lloyd(X, k, np.random.default_rng(seq))
        wss = history[-1]
        if best is None or wss < best[2]:
            best = (labels, centroids, wss)
    return best


def pca_kmeans(signals, k: int, q: int = 4, n_starts: int = 10, seed: int = 0):
    """The full baseline: PCA scores then k-means labels.

    Returns
    -------
    (labels, projection, within_ss)
    """
    projection = pca(signals, q)
    labels, _, wss = kmeans(projection.scores, k, n_starts=n_starts, seed=seed)
    return labels, projection, wss
