import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_graph(rng, n, p=0.5, connected=True):
    """Random undirected WeightedGraph; a spanning path keeps it connected."""
    from superpart.neighborhood import WeightedGraph

    pairs = {(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p}
    if connected:
        order = rng.permutation(n)
        pairs |= {tuple(sorted((int(order[i]), int(order[i + 1])))) for i in range(n - 1)}
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return WeightedGraph(n, edges, np.ones(len(edges)))


def lattice_box(rng, max_side=6, spacing=None):
    """All points of a random axis-aligned grid cuboid (a discrete convex blob)."""
    sides = rng.integers(1, max_side + 1, 3)
    g = np.stack(np.meshgrid(*[np.arange(s) for s in sides], indexing="ij"), axis=-1).reshape(-1, 3)
    return g.astype(np.float64) * (1.0 if spacing is None else spacing)


def convex_pair(rng, max_points=200):
    """Two disjoint grid cuboids on a shared lattice, jointly scaled, rotated and shifted.

    Returns (P, Q) with at most ``max_points`` points each.
    """
    from scipy.spatial.transform import Rotation

    while True:
        p, q = lattice_box(rng), lattice_box(rng)
        if len(p) <= max_points and len(q) <= max_points:
            break
    d = rng.normal(size=3)
    reach = p.max() + q.max() + rng.integers(0, 4)
    q = q + np.round(d / np.abs(d).max() * reach)
    pts = np.vstack([p, q]) * rng.uniform(0.01, 0.2)
    pts = pts @ Rotation.random(random_state=int(rng.integers(2**31))).as_matrix().T + rng.normal(size=3)
    return pts[:len(p)], pts[len(p):]


def blob_scene(rng, n_blobs=400, extent=(6.0, 6.0, 2.0), points=(10, 100)):
    """Anisotropic Gaussian blobs; returns (positions, blob id per point)."""
    pts, lab = [], []
    centers = rng.random((n_blobs, 3)) * extent
    for i, c in enumerate(centers):
        n = int(rng.integers(*points))
        pts.append(c + rng.normal(size=(n, 3)) * rng.uniform(0.05, 0.25, 3))
        lab.append(np.full(n, i))
    return np.vstack(pts), np.concatenate(lab)


def scalar_hierarchical_loss(logits, point_index_per_level, labels, mu_weights):
    """Loop-by-loop recomputation of the hierarchical loss from point memberships."""
    import math

    labeled = [i for i, y in enumerate(labels) if y >= 0]
    total = 0.0
    for lvl, z in enumerate(logits, start=1):
        members = {}
        for i in labeled:
            members.setdefault(int(point_index_per_level[lvl - 1][i]), []).append(int(labels[i]))
        for p, ys in members.items():
            row = [float(t) for t in z[p]]
            top = max(row)
            denom = sum(math.exp(t - top) for t in row)
            probs = [math.exp(t - top) / denom for t in row]
            counts = [ys.count(k) for k in range(len(row))]
            if lvl == 1:
                target = [0.0] * len(row)
                target[counts.index(max(counts))] = 1.0
                coef = 1.0
            else:
                target = [c / len(ys) for c in counts]
                coef = mu_weights[lvl - 2]
            h = -sum(t * math.log(max(pr, 1e-12)) for t, pr in zip(target, probs))
            total += coef * len(ys) / len(labeled) * h
    return total
