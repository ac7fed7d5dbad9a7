"""Pairwise divergence matrices and shortest-path geodesic estimates."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, dijkstra

from .data import Collection, format_float, read_matrix_csv
from .divergence import Metric, estimate_divergence, fisher_approximation
from .errors import ValidationError

__all__ = [
    "DistanceMatrix",
    "pairwise_distances",
    "geodesic_distances",
    "floyd_warshall",
    "read_distance_csv",
    "write_distance_csv",
    "resolve_threads",
]

# above this many nodes the all-pairs search switches to repeated Dijkstra
FLOYD_WARSHALL_MAX_NODES = 64


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray
    kind: str = "direct"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"distance matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("distance matrix has non-finite entries")
        if np.any(v < 0):
            raise ValidationError("distance matrix has negative entries")
        if np.any(np.diag(v) != 0):
            raise ValidationError("distance matrix diagonal must be zero")
        if not np.array_equal(v, v.T):
            raise ValidationError("distance matrix must be symmetric")
        if self.kind not in ("direct", "geodesic"):
            raise ValidationError(f"unknown distance matrix kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def resolve_threads(threads: Optional[int]) -> int:
    """``None`` falls back to ``INFOGEO_THREADS`` then 1; ``0`` means all cores."""
    if threads is None:
        env = os.environ.get("INFOGEO_THREADS")
        threads = int(env) if env else 1
    if threads < 0:
        raise ValidationError(f"threads must be >= 0, got {threads}")
    return threads or (os.cpu_count() or 1)


def _map_pairs(fn, pairs, threads):
    threads = resolve_threads(threads)
    if threads == 1 or len(pairs) < 2:
        return [fn(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pairs))


def pairwise_distances(
    collection: Collection,
    metric=Metric.SYMMETRIC_KL,
    projection=None,
    fisher_scale: bool = False,
    threads: Optional[int] = 1,
    bandwidths=None,
) -> DistanceMatrix:
    """Divergence between every pair of datasets, each unordered pair computed once.

    ``bandwidths`` optionally fixes each set's kernel bandwidth (one array
    per dataset, in the evaluation space) instead of deriving it from data.
    """
    metric = Metric.parse(metric)
    if not metric.symmetric:
        raise ValidationError("pairwise distances need a symmetric metric (skl, hellinger, bhattacharya)")
    if fisher_scale and metric is Metric.BHATTACHARYA:
        raise ValidationError("Fisher scaling is not defined for the Bhattacharya distance")

    def one(pair):
        i, j = pair
        bw = None if bandwidths is None else (bandwidths[i], bandwidths[j])
        val = estimate_divergence(metric, collection[i], collection[j], projection, bw)
        val = max(val, 0.0)  # -log(1) gives -0.0
        return fisher_approximation(metric, val) if fisher_scale else val

    n = len(collection)
    pairs = list(combinations(range(n), 2))
    vals = _map_pairs(one, pairs, threads)
    out = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        out[i, j] = out[j, i] = v
    return DistanceMatrix(out, "direct")


def floyd_warshall(weights: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths on a dense weight matrix (``inf`` = no edge)."""
    dist = np.array(weights, dtype=float)
    for k in range(dist.shape[0]):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    return dist


def _knn_mask(values: np.ndarray, k: int) -> np.ndarray:
    n = values.shape[0]
    off = values + np.diag(np.full(n, np.inf))
    nearest = np.argsort(off, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nearest.ravel()] = True
    return mask | mask.T


def geodesic_distances(direct: DistanceMatrix, n_neighbors: Optional[int] = None) -> DistanceMatrix:
    """Shortest-path lengths through the weighted graph of direct distances.

    The graph is complete unless ``n_neighbors`` is given, in which case each
    node keeps only edges to its ``n_neighbors`` nearest nodes (symmetrized).
    A disconnected sparsified graph raises :class:`ValidationError`.
    """
    if not isinstance(direct, DistanceMatrix):
        direct = DistanceMatrix(direct, "direct")
    w = np.array(direct.values)
    n = w.shape[0]
    if n_neighbors is not None:
        if not 1 <= n_neighbors < n:
            raise ValidationError(f"n_neighbors must be in [1, {n - 1}], got {n_neighbors}")
        w = np.where(_knn_mask(w, n_neighbors), w, np.inf)
        np.fill_diagonal(w, 0.0)
        graph = csgraph_from_dense(w, null_value=np.inf)
        n_comp, _ = connected_components(graph, directed=False)
        if n_comp > 1:
            raise ValidationError(
                f"neighbor graph is disconnected ({n_comp} components); increase n_neighbors"
            )
    if n <= FLOYD_WARSHALL_MAX_NODES:
        g = floyd_warshall(w)
    else:
        g = dijkstra(csgraph_from_dense(w, null_value=np.inf), directed=False)
    g = np.minimum(g, g.T)
    np.fill_diagonal(g, 0.0)
    return DistanceMatrix(g, "geodesic")


def write_distance_csv(path, dm: DistanceMatrix, labels=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if labels is not None:
            w.writerow(labels)
        for row in dm.values:
            w.writerow([format_float(v) for v in row])


def read_distance_csv(path, kind: str = "direct") -> DistanceMatrix:
    values = read_matrix_csv(path, min_rows=1)
    return DistanceMatrix(values, kind)
