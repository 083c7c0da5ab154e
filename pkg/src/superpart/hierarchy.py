"""Nested multi-level partitions built by repeated cut pursuit on reduced graphs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cut_pursuit import Partition, SolverConfig, minimize_l0
from .errors import NonBracketingError
from .neighborhood import WeightedGraph


@dataclass
class LevelStats:
    centroids: np.ndarray
    mean_features: np.ndarray
    point_counts: np.ndarray
    radii: np.ndarray


@dataclass
class HierarchicalPartition:
    """Levels 1..I; ``levels[i-1].super_index`` maps level i-1 elements to level i.

    Level 0 is the identity partition of the input points.
    """

    positions: np.ndarray
    features: np.ndarray
    levels: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    graphs: list = field(default_factory=list)

    @property
    def level_count(self):
        return len(self.levels)

    @property
    def point_count(self):
        return len(self.positions)

    def size(self, i):
        return self.point_count if i == 0 else self.levels[i - 1].num_components

    def sizes(self):
        return [self.size(i) for i in range(self.level_count + 1)]

    def point_index(self, i):
        """Level-i component of every point."""
        idx = np.arange(self.point_count)
        for level in self.levels[:i]:
            idx = level.super_index[idx]
        return idx

    def parent(self, i):
        """Map from level i-1 elements to level i components."""
        return self.levels[i - 1].super_index

    def children(self, i, p):
        """Level i-1 elements of level-i component ``p``."""
        return np.flatnonzero(self.parent(i) == p)

    def level_stats(self, i):
        if i == 0:
            n = self.point_count
            return LevelStats(self.positions, self.features, np.ones(n, dtype=np.int64), np.zeros(n))
        return self.stats[i - 1]

    def check_nesting(self):
        """True when every level is a surjective map onto contiguous ids of the next."""
        for i, level in enumerate(self.levels, start=1):
            si = level.super_index
            if len(si) != self.size(i - 1):
                return False
            if len(si) and (si.min() != 0 or si.max() != level.num_components - 1):
                return False
            if len(np.unique(si)) != level.num_components:
                return False
        return True


def reduce_graph(graph, partition):
    """Graph of components; edge weights sum the weights of crossing edges."""
    si = partition.super_index if isinstance(partition, Partition) else np.asarray(partition)
    s = int(si.max()) + 1 if len(si) else 0
    if isinstance(partition, Partition):
        s = partition.num_components
    u = si[graph.edges[:, 0]]
    v = si[graph.edges[:, 1]]
    return WeightedGraph.from_pairs(s, u, v, graph.weights)


def component_stats(positions, features, point_index, n_components):
    """Centroids, point-weighted mean features, counts and radii of point groups."""
    counts = np.bincount(point_index, minlength=n_components)
    safe = np.where(counts > 0, counts, 1)[:, None]
    centroids = np.stack([np.bincount(point_index, positions[:, j], minlength=n_components)
                          for j in range(3)], axis=1) / safe
    mean = np.stack([np.bincount(point_index, features[:, j], minlength=n_components)
                     for j in range(features.shape[1])], axis=1) / safe
    dist = np.linalg.norm(positions - centroids[point_index], axis=1)
    radii = np.zeros(n_components)
    np.maximum.at(radii, point_index, dist)
    return LevelStats(centroids, mean.reshape(n_components, features.shape[1]), counts.astype(np.int64), radii)


def build_hierarchy(f, graph, positions, lambdas, solver=None, weighted_fidelity=True):
    """Partition levels 1..I with regularization ``lambdas[i-1]`` at level i.

    Each level is solved on the previous level's mean features and reduced graph;
    with ``weighted_fidelity`` every super-node's error is scaled by its point count.
    """
    if len(lambdas) == 0:
        raise ValueError("need at least one lambda")
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("lambdas must be > 0")
    solver = solver or SolverConfig()
    f = np.asarray(f, dtype=np.float64)
    f = f.reshape(len(f), -1)
    positions = np.asarray(positions, dtype=np.float64)
    if len(f) != graph.node_count or len(positions) != graph.node_count:
        raise ValueError("signal, positions and graph sizes differ")
    hp = HierarchicalPartition(positions, f)
    signal, g, counts = f, graph, np.ones(len(f))
    point_index = np.arange(len(f))
    for lam in lambdas:
        part = minimize_l0(signal, g, replace(solver, lam=float(lam)),
                           node_weight=counts if weighted_fidelity else None)
        point_index = part.super_index[point_index]
        st = component_stats(positions, f, point_index, part.num_components)
        g = reduce_graph(g, part)
        hp.levels.append(part)
        hp.stats.append(st)
        hp.lambdas.append(float(lam))
        hp.graphs.append(g)
        signal, counts = st.mean_features, st.point_counts.astype(np.float64)
    return hp


def tune_lambda(f, graph, positions=None, target_ratio=30.0, bounds=(1e-3, 10.0), tol=0.2,
                solver=None, node_weight=None, max_steps=20, return_partition=False):
    """Regularization giving about ``N / target_ratio`` components.

    Bisection on log(lambda), stopping once the component count is within ``tol``
    (relative) of the target.  The solver is a heuristic, so the count is not
    guaranteed monotone in lambda: the closest count seen wins.  Raises
    NonBracketingError when the bounds do not straddle the target.
    """
    if not target_ratio > 1:
        raise ValueError("target_ratio must be > 1")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not 0 < lo < hi:
        raise ValueError("need 0 < lambda_lo < lambda_hi")
    solver = solver or SolverConfig()
    target = graph.node_count / target_ratio
    seen = []

    def run(lam):
        part = minimize_l0(f, graph, replace(solver, lam=lam), node_weight=node_weight)
        seen.append((abs(part.num_components - target), lam, part))
        return part.num_components

    def best():
        _, lam, part = min(seen, key=lambda t: (t[0], t[1]))
        return (lam, part) if return_partition else lam

    n_lo, n_hi = run(lo), run(hi)
    if abs(n_lo - target) <= tol * target or abs(n_hi - target) <= tol * target:
        return best()
    if not n_lo > target > n_hi:
        b = min(seen, key=lambda t: (t[0], t[1]))
        raise NonBracketingError(
            f"bounds give {n_lo} and {n_hi} components, target {target:.1f}",
            best_lambda=b[1], best_count=b[2].num_components)
    a, b = math.log(lo), math.log(hi)
    for _ in range(max_steps):
        mid = 0.5 * (a + b)
        n = run(math.exp(mid))
        if abs(n - target) <= tol * target:
            break
        if n > target:
            a = mid
        else:
            b = mid
    return best()


def hierarchy_from_indices(positions, features, super_indices):
    """Hierarchy from explicit parent maps (level i-1 -> level i ids), kept as given.

    Ids of every map must cover 0..S_i-1.  Used for toy scenes and relabeling tests.
    """
    positions = np.asarray(positions, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64).reshape(len(positions), -1)
    hp = HierarchicalPartition(positions, features)
    point_index = np.arange(len(positions))
    for si in super_indices:
        si = np.asarray(si, dtype=np.int64)
        s = int(si.max()) + 1 if len(si) else 0
        sizes = np.bincount(si, minlength=s)
        if len(si) != hp.size(hp.level_count) or np.any(sizes == 0):
            raise ValueError("parent map must be surjective onto 0..S-1")
        point_index = si[point_index]
        st = component_stats(positions, features, point_index, s)
        hp.levels.append(Partition(si, st.mean_features, sizes))
        hp.stats.append(st)
        hp.lambdas.append(float("nan"))
    return hp
