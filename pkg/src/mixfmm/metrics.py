"""Clustering validity indices: accuracy, Ball-Hall, Davies-Bouldin, ASW.

Accuracy is an external index; the confusion matrix is re-labeled by the
assignment that maximizes its diagonal before the diagonal sum is taken,
so any renaming of the labels scores the same. The other three are
internal indices built from cluster sizes, barycenters and dispersions
(mean squared distance to the barycenter).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .exceptions import MetricError
from .waves import as_matrix


@dataclass
class ConfusionMatrix:
    """Square counts matrix, rows = true labels, cols = predicted labels.

    Zero-padded to r x r with r = max(number of predicted, number of
    true labels); the label lists map rows/cols back to the original
    label values.
    """

    counts: np.ndarray
    true_labels: list
    pred_labels: list


@dataclass
class ClusterSummary:
    """Sizes, barycenters and dispersions of the clusters of a partition."""

    labels: list
    sizes: np.ndarray
    barycenters: np.ndarray
    dispersions: np.ndarray


def confusion_matrix(pred, true) -> ConfusionMatrix:
    pred = np.asarray(pred)
    true = np.asarray(true)
    if pred.size == 0 or pred.shape != true.shape:
        raise MetricError("label vectors must be equal-length and non-empty")
    true_vals = sorted(set(true.tolist()))
    pred_vals = sorted(set(pred.tolist()))
    r = max(len(true_vals), len(pred_vals))
    counts = np.zeros((r, r), dtype=int)
    t_index = {v: i for i, v in enumerate(true_vals)}
    p_index = {v: i for i, v in enumerate(pred_vals)}
    for tv, pv in zip(true, pred):
        counts[t_index[tv], p_index[pv]] += 1
    return ConfusionMatrix(counts=counts, true_labels=true_vals, pred_labels=pred_vals)


def accuracy(pred, true) -> float:
    """Best-matching fraction of agreeing labels, in [0, 1].

    The matching that maximizes the confusion-matrix diagonal is found
    with the Hungarian method, so the score does not depend on how
    either labeling names its clusters.
    """
    cm = confusion_matrix(pred, true)
    rows, cols = linear_sum_assignment(cm.counts, maximize=True)
    return float(cm.counts[rows, cols].sum()) / float(np.asarray(pred).size)


def cluster_summary(signals, labels) -> ClusterSummary:
    X = as_matrix(signals)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise MetricError("labels length must match the number of signals")
    values = sorted(set(labels.tolist()))
    sizes = np.empty(len(values), dtype=int)
    centers = np.empty((len(values), X.shape[1]))
    disps = np.empty(len(values))
    for i, v in enumerate(values):
        members = X[labels == v]
        sizes[i] = members.shape[0]
        centers[i] = members.mean(axis=0)
        disps[i] = ((members - centers[i]) ** 2).sum(axis=1).mean()
    return ClusterSummary(labels=values, sizes=sizes, barycenters=centers,
                          dispersions=disps)


def ball_hall(signals, labels) -> float:
    """Mean of the cluster dispersions (lower is better)."""
    return float(cluster_summary(signals, labels).dispersions.mean())


def davies_bouldin(signals, labels) -> float:
    """Mean over clusters of the worst dispersion-sum to separation ratio.

    Dispersion here is the mean squared distance to the barycenter (not
    its square root). Lower is better.
    """
    summary = cluster_summary(signals, labels)
    k = len(summary.labels)
    if k < 2:
        raise MetricError("Davies-Bouldin needs at least 2 clusters")
    dist = cdist(summary.barycenters, summary.barycenters)
    off = ~np.eye(k, dtype=bool)
    if np.any(dist[off] == 0.0):
        raise MetricError("coincident barycenters make Davies-Bouldin undefined")
    d = summary.dispersions
    ratio = (d[:, None] + d[None, :]) / np.where(off, dist, np.inf)
    return float(ratio.max(axis=1).mean())


def silhouette(signals, labels):
    """Average silhouette width and per-point silhouettes.

    a_i is the mean distance to the other members of the own cluster,
    b_i the smallest mean distance to another cluster, and
    s_i = (b_i - a_i) / max(a_i, b_i), with s_i = 0 for singleton
    clusters and for points where both means vanish. The returned ASW
    macro-averages the per-cluster silhouette means over clusters.

    Returns
    -------
    (float, ndarray)
        ASW in [-1, 1] and the n per-point silhouette values.
    """
    X = as_matrix(signals)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise MetricError("labels length must match the number of signals")
    values = sorted(set(labels.tolist()))
    k = len(values)
    if k < 2:
        raise MetricError("silhouette needs at least 2 clusters")
    n = X.shape[0]
    dist = cdist(X, X)
    onehot = np.zeros((n, k))
    for i, v in enumerate(values):
        onehot[labels == v, i] = 1.0
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot  # (n, k) total distance from each point to each cluster

    s = np.zeros(n)
    own = np.array([values.index(v) for v in labels])
    own_size = sizes[own]
    multi = own_size > 1
    a = np.zeros(n)
    a[multi] = sums[np.arange(n), own][multi] / (own_size[multi] - 1.0)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(n), own] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    ok = multi & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]

    per_cluster = np.array([s[labels == v].mean() for v in values])
    return float(per_cluster.mean()), s
