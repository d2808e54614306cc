"""Density clustering, cluster back-projection and PCA of layer representations."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ParameterError, ShapeError
from .geometry import as_cloud

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int = 10

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ParameterError("min_pts must be at least 1")


@dataclass
class ClusterAssignment:
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size and self.labels.max() >= 0 else 0

    @property
    def sizes(self) -> List[int]:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.k).tolist()

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels == NOISE))

    def to_csv(self, path=None) -> str:
        text = "index,label\n" + "".join(f"{i},{l}\n" for i, l in enumerate(self.labels.tolist()))
        if path is not None:
            from pathlib import Path

            Path(path).write_text(text)
        return text


def dbscan(cloud, params: DbscanParams) -> ClusterAssignment:
    """Density-based clustering.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``.  Clusters are grown breadth-first from core points in
    input order, so a border point reachable from several clusters joins
    the one with the lowest index.
    """
    cloud = as_cloud(cloud)
    n = cloud.shape[0]
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return ClusterAssignment(labels)
    tree = cKDTree(cloud)
    neighbours = tree.query_ball_point(cloud, r=params.eps, p=2.0)
    core = np.fromiter((len(nb) >= params.min_pts for nb in neighbours), dtype=bool, count=n)
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighbours[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return ClusterAssignment(labels)


def knn_distances(cloud, k: int) -> np.ndarray:
    """Distance from each point to its ``k``-th nearest other point."""
    cloud = as_cloud(cloud)
    if cloud.shape[0] <= k:
        raise ParameterError(f"need more than {k} points, got {cloud.shape[0]}")
    dist, _ = cKDTree(cloud).query(cloud, k=k + 1)
    return dist[:, k]


def default_eps(cloud, min_pts: int = 10, quantile: float = 0.5) -> float:
    """``quantile`` of the distances to each point's ``min_pts``-th neighbour."""
    eps = float(np.quantile(knn_distances(cloud, min_pts), quantile))
    return eps if eps > 0 else 1e-12


def project_clusters_to_data(assignment: ClusterAssignment, original) -> List[np.ndarray]:
    """Input-space indices of each cluster, in cluster order; noise excluded.

    Index arrays keep provenance; ``original[idx]`` gives the cluster's points.
    """
    original = as_cloud(original)
    if assignment.labels.shape[0] != original.shape[0]:
        raise ShapeError(
            f"{assignment.labels.shape[0]} labels for {original.shape[0]} points"
        )
    return [np.flatnonzero(assignment.labels == c) for c in range(assignment.k)]


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def q(self) -> int:
        return self.components.shape[0]


def pca_fit(cloud, q: int) -> PcaModel:
    """Top-``q`` eigenvectors of the sample covariance (``ddof=1``).

    Each component is signed so its largest-magnitude entry is positive.
    """
    cloud = as_cloud(cloud)
    n, d = cloud.shape
    if not 1 <= q <= d:
        raise ParameterError(f"need 1 <= q <= {d}, got {q}")
    if n < 2:
        raise ParameterError("PCA needs at least two points")
    mean = cloud.mean(axis=0)
    centred = cloud - mean
    cov = centred.T @ centred / (n - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1][:q]
    comps = vectors[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    variances = np.clip(values[order], 0.0, None)
    return PcaModel(mean, comps, variances)


def pca_project(model: PcaModel, cloud) -> np.ndarray:
    cloud = as_cloud(cloud)
    if cloud.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"cloud has dimension {cloud.shape[1]}, model expects {model.mean.shape[0]}")
    return (cloud - model.mean) @ model.components.T
