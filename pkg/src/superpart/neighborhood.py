"""Exact spatial search: k-NN tables, radius queries and the k-NN adjacency graph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .parallel import thread_count


@dataclass
class WeightedGraph:
    """Undirected graph stored as a canonical edge list (u < v, lexicographic order)."""

    node_count: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.edges) != len(self.weights):
            raise ValueError("edges and weights differ in length")

    @property
    def edge_count(self):
        return len(self.edges)

    def validate(self):
        e = self.edges
        if len(e) and (e.min() < 0 or e.max() >= self.node_count):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loop")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and >= 0")

    @classmethod
    def from_pairs(cls, node_count, u, v, weights=None):
        """Canonicalize arbitrary (u, v) pairs: drop self-loops, merge duplicates by summing weights."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.ones(len(u)) if weights is None else np.asarray(weights, dtype=np.float64)
        keep = u != v
        a = np.minimum(u[keep], v[keep])
        b = np.maximum(u[keep], v[keep])
        key = a * max(node_count, 1) + b
        uniq, inv = np.unique(key, return_inverse=True)
        summed = np.bincount(inv, w[keep], minlength=len(uniq))
        edges = np.stack([uniq // max(node_count, 1), uniq % max(node_count, 1)], axis=1)
        return cls(node_count, edges, summed)


def knn_indices(positions, k, workers=None):
    """N x k table of nearest neighbors of every point, excluding the point itself.

    Rows are sorted by increasing distance; equal distances are ordered by index.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    workers = thread_count() if workers is None else workers
    tree = cKDTree(positions)
    chunk = 200_000
    parts = [
        _sorted_neighbors_chunk(tree, positions, start, min(start + chunk, n), k, workers)
        for start in range(0, n, chunk)
    ]
    return np.concatenate(parts, axis=0)


def _sorted_neighbors_chunk(tree, positions, start, stop, k, workers):
    # rows sorted by (exact squared distance, index); self excluded by index
    n = len(positions)
    queries = positions[start:stop]
    out = np.empty((stop - start, k), dtype=np.int64)
    pending = np.arange(stop - start)
    margin = 4
    while len(pending):
        kq = min(n, k + 1 + margin)
        _, idx = tree.query(queries[pending], k=kq, workers=workers)
        idx = idx.reshape(len(pending), kq)
        d2 = ((positions[idx] - queries[pending][:, None, :]) ** 2).sum(axis=2)
        d2[idx == (pending + start)[:, None]] = -1.0
        rows = np.arange(len(pending))[:, None]
        order = np.lexsort((idx, d2), axis=1)
        idx = idx[rows, order]
        d2 = d2[rows, order]
        unsure = d2[:, k] == d2[:, -1] if kq < n else np.zeros(len(pending), dtype=bool)
        done = ~unsure
        out[pending[done]] = idx[done, 1:k + 1]
        pending = pending[unsure]
        margin *= 4
    return out


def graph_from_knn(table, node_count=None):
    """Union-symmetrized unit-weight graph from a k-NN table."""
    n = len(table) if node_count is None else node_count
    k = table.shape[1]
    u = np.repeat(np.arange(len(table), dtype=np.int64), k)
    v = table.reshape(-1).astype(np.int64)
    a = np.minimum(u, v)
    b = np.maximum(u, v)
    key = np.unique(a * n + b)
    edges = np.stack([key // n, key % n], axis=1)
    return WeightedGraph(n, edges, np.ones(len(edges)))


def build_knn_graph(positions, k, workers=None):
    """k-NN adjacency graph with unit weights, symmetrized by union."""
    return graph_from_knn(knn_indices(positions, k, workers=workers))


def neighbors_within(positions, queries, radius, workers=None):
    """For each query, the ascending indices of points within ``radius`` (inclusive).

    ``radius`` may be a scalar or one value per query.
    """
    radius = np.asarray(radius, dtype=np.float64)
    if np.any(~(radius > 0)):
        raise ValueError("radius must be > 0")
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    if len(positions) == 0:
        return [np.zeros(0, dtype=np.int64) for _ in range(len(queries))]
    workers = thread_count() if workers is None else workers
    tree = cKDTree(positions)
    lists = tree.query_ball_point(queries, radius, return_sorted=True, workers=workers)
    return [np.asarray(lst, dtype=np.int64) for lst in lists]
