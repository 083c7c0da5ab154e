"""Superpoint adjacency graphs and their 18 handcrafted edge features.

Two superpoints are adjacent when their point sets come within a gap ``eps``.
Candidates are pruned on centroids (distance <= r_p + r_q + eps), then the gap is
estimated by alternating nearest points starting from both centroids.

Edge features, per oriented edge p -> q:

    interface (7)  mean offset, mean offset length, per-axis std of offsets
    ratio (4)      length, surface, volume and point-count ratios p / q
    pose (7)       |cos| normal/normal, |cos| normal_p/offset, |cos| normal_q/offset,
                   centroid distance, unit centroid offset
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .features import covariance_eigh
from .neighborhood import neighbors_within

FEATURE_DIM = 18
RATIO_FLOOR = 1e-6
INTERFACE = slice(0, 7)
RATIO = slice(7, 11)
POSE = slice(11, 18)


@dataclass
class SuperpointGraph:
    """Oriented adjacency of level-``level`` superpoints; both orientations stored."""

    level: int
    edges: np.ndarray
    adjacency_features: np.ndarray
    gap_distance: np.ndarray
    epsilon: float = 0.0

    @property
    def edge_count(self):
        return len(self.edges)

    def validate(self):
        e = self.edges
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self edge")
        fwd = set(map(tuple, e.tolist()))
        if any((q, p) not in fwd for p, q in fwd):
            raise ValueError("edge set is not symmetric")
        if not np.all(np.isfinite(self.adjacency_features)):
            raise ValueError("non-finite feature")
        if np.any(self.gap_distance > self.epsilon):
            raise ValueError("gap above epsilon")


@dataclass
class SuperpointShape:
    """Per-superpoint PCA of member points: centroids, sqrt-eigenvalues, normals, counts."""

    centroids: np.ndarray
    scales: np.ndarray
    normals: np.ndarray
    counts: np.ndarray
    axes: np.ndarray


def relative_positions(positions):
    """Positions relative to the first point.

    Every derived quantity then depends on coordinate differences only, so a
    translation that keeps the coordinates exactly representable leaves all
    features bit-identical.
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(positions) == 0:
        return np.ascontiguousarray(positions)
    return np.ascontiguousarray(positions - positions[0])


def superpoint_shapes(positions, point_index, n_components):
    positions = np.asarray(positions, dtype=np.float64)
    counts = np.bincount(point_index, minlength=n_components)
    safe = np.where(counts > 0, counts, 1)
    centroids = np.stack([np.bincount(point_index, positions[:, j], minlength=n_components)
                          for j in range(3)], axis=1) / safe[:, None]
    q = positions - centroids[point_index]
    cov = np.empty((n_components, 3, 3))
    for i in range(3):
        for j in range(i, 3):
            cov[:, i, j] = cov[:, j, i] = np.bincount(point_index, q[:, i] * q[:, j],
                                                      minlength=n_components) / safe
    vals, vecs = covariance_eigh(cov)
    return SuperpointShape(centroids, np.sqrt(vals), vecs[:, :, 2], counts.astype(np.int64),
                           np.ascontiguousarray(vecs[:, :, 0]))


# -- gap ---------------------------------------------------------------------


def sorted_members(positions, point_index, n_components, axes):
    """CSR members of every superpoint sorted by projection on its axis.

    Returns (order, offsets, sproj) with sproj[k] the projection of point order[k].
    Nearest-point searches then only scan a slab around the query.
    """
    point_index = np.asarray(point_index, dtype=np.int64)
    proj = np.einsum("ij,ij->i", positions, axes[point_index])
    order = np.lexsort((np.arange(len(point_index)), proj, point_index)).astype(np.int64)
    offsets = np.zeros(n_components + 1, dtype=np.int64)
    np.cumsum(np.bincount(point_index, minlength=n_components), out=offsets[1:])
    return order, offsets, np.ascontiguousarray(proj[order])


@njit(cache=True)
def _slab_tol(x):
    # slack for rounding in the projections
    return 1e-9 * (1.0 + np.abs(x))


@njit(cache=True)
def _nearest(pos, order, sproj, axis, start, stop, x):
    xp = x[0] * axis[0] + x[1] * axis[1] + x[2] * axis[2]
    tol = _slab_tol(xp)
    k0 = start + np.searchsorted(sproj[start:stop], xp)
    best = -1
    best_d = np.inf
    reach = np.inf
    k = k0
    while k < stop and sproj[k] - xp <= reach:
        j = order[k]
        d = (pos[j, 0] - x[0]) ** 2 + (pos[j, 1] - x[1]) ** 2 + (pos[j, 2] - x[2]) ** 2
        if d < best_d or (d == best_d and j < best):
            best_d = d
            best = j
            reach = np.sqrt(d) + tol
        k += 1
    k = k0 - 1
    while k >= start and xp - sproj[k] <= reach:
        j = order[k]
        d = (pos[j, 0] - x[0]) ** 2 + (pos[j, 1] - x[1]) ** 2 + (pos[j, 2] - x[2]) ** 2
        if d < best_d or (d == best_d and j < best):
            best_d = d
            best = j
            reach = np.sqrt(d) + tol
        k -= 1
    return best


@njit(cache=True)
def _gap_kernel(pos, order, offsets, sproj, axes, centroids, pairs, num_steps):
    n = pairs.shape[0]
    dist = np.empty(n)
    anchor_p = np.empty(n, dtype=np.int64)
    anchor_q = np.empty(n, dtype=np.int64)
    trace = np.empty((n, num_steps))
    for e in range(n):
        p, q = pairs[e, 0], pairs[e, 1]
        c1 = centroids[p].copy()
        c2 = centroids[q].copy()
        i1 = -1
        i2 = -1
        for s in range(num_steps):
            i2 = _nearest(pos, order, sproj, axes[q], offsets[q], offsets[q + 1], c1)
            c2 = pos[i2]
            i1 = _nearest(pos, order, sproj, axes[p], offsets[p], offsets[p + 1], c2)
            c1 = pos[i1]
            trace[e, s] = np.sqrt(((c1 - c2) ** 2).sum())
        dist[e] = trace[e, num_steps - 1]
        anchor_p[e] = i1
        anchor_q[e] = i2
    return dist, anchor_p, anchor_q, trace


def _pair_arrays(points_p, points_q):
    p = np.asarray(points_p, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(points_q, dtype=np.float64).reshape(-1, 3)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("point sets must be nonempty")
    pos = np.vstack([p, q])
    point_index = np.repeat(np.array([0, 1]), [len(p), len(q)])
    shapes = superpoint_shapes(pos, point_index, 2)
    order, offsets, sproj = sorted_members(pos, point_index, 2, shapes.axes)
    centroids = np.stack([p.mean(axis=0), q.mean(axis=0)])
    return pos, order, offsets, sproj, shapes.axes, centroids


def approximate_gap(points_p, points_q, num_steps=3, return_trace=False):
    """Alternating nearest-point estimate of the gap between two point sets.

    Starts from both centroids; each step moves the q anchor to the point of q
    nearest the p anchor, then the p anchor to the point of p nearest the new q
    anchor (ties to the lowest index).  Returns (distance, anchor_p, anchor_q),
    plus the per-step distances with ``return_trace``.  The distance is an upper
    bound of the exact minimum and never increases from one step to the next.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    pos, order, offsets, sproj, axes, centroids = _pair_arrays(points_p, points_q)
    d, ap, aq, trace = _gap_kernel(pos, order, offsets, sproj, axes, centroids,
                                   np.array([[0, 1]], dtype=np.int64), num_steps)
    out = (float(d[0]), pos[ap[0]].copy(), pos[aq[0]].copy())
    return out + (trace[0].copy(),) if return_trace else out


def exact_gap(points_p, points_q, chunk=2048):
    """Exact minimum pair distance by exhaustive scan."""
    p = np.asarray(points_p, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(points_q, dtype=np.float64).reshape(-1, 3)
    best = np.inf
    for s in range(0, len(p), chunk):
        d2 = ((p[s:s + chunk, None, :] - q[None, :, :]) ** 2).sum(axis=2)
        best = min(best, float(d2.min()))
    return float(np.sqrt(best))


# -- interface -----------------------------------------------------------------


@njit(cache=True)
def _select_near(pos, order, sproj, axis, start, stop, anchor, anchor_idx, window2, k):
    ap = anchor[0] * axis[0] + anchor[1] * axis[1] + anchor[2] * axis[2]
    w = np.sqrt(window2) + _slab_tol(ap)
    lo = start + np.searchsorted(sproj[start:stop], ap - w)
    hi = start + np.searchsorted(sproj[start:stop], ap + w, side="right")
    idx = np.empty(hi - lo + 1, dtype=np.int64)
    c = 0
    seen_anchor = False
    for t in range(lo, hi):
        j = order[t]
        if ((pos[j] - anchor) ** 2).sum() <= window2 or j == anchor_idx:
            idx[c] = j
            c += 1
            seen_anchor = seen_anchor or j == anchor_idx
    if not seen_anchor:
        idx[c] = anchor_idx
        c += 1
    idx = np.sort(idx[:c])
    d2 = np.empty(c)
    for t in range(c):
        d2[t] = ((pos[idx[t]] - anchor) ** 2).sum()
    # nearest first, ties to the lowest index
    sel = np.argsort(d2, kind="mergesort")
    return idx[sel[:min(k, c)]]


@njit(cache=True)
def _interface_kernel(pos, order, offsets, sproj, axes, pairs, anchor_p, anchor_q, gaps, margin, k):
    n = pairs.shape[0]
    out = np.zeros((n, 7))
    for e in range(n):
        p, q = pairs[e, 0], pairs[e, 1]
        ap = pos[anchor_p[e]]
        aq = pos[anchor_q[e]]
        w = gaps[e] + margin
        w2 = w * w
        sp = _select_near(pos, order, sproj, axes[p], offsets[p], offsets[p + 1], aq, anchor_p[e], w2, k)
        sq = _select_near(pos, order, sproj, axes[q], offsets[q], offsets[q + 1], ap, anchor_q[e], w2, k)
        m = min(len(sp), len(sq))
        sp = sp[:m]
        sq = sq[:m]
        pts = np.empty((2 * m, 3))
        for t in range(m):
            pts[t] = pos[sp[t]]
            pts[m + t] = pos[sq[t]]
        center = np.zeros(3)
        for t in range(2 * m):
            center += pts[t]
        center /= 2 * m
        cov = np.zeros((3, 3))
        for t in range(2 * m):
            dlt = pts[t] - center
            cov += np.outer(dlt, dlt)
        _, vecs = np.linalg.eigh(cov)
        axis = vecs[:, 2]
        proj_p = np.empty(m)
        proj_q = np.empty(m)
        for t in range(m):
            proj_p[t] = ((pts[t] - center) * axis).sum()
            proj_q[t] = ((pts[m + t] - center) * axis).sum()
        op = np.argsort(proj_p, kind="mergesort")
        oq = np.argsort(proj_q, kind="mergesort")
        off = np.empty((m, 3))
        for t in range(m):
            off[t] = pts[m + oq[t]] - pts[op[t]]
        mean = np.zeros(3)
        length = 0.0
        for t in range(m):
            mean += off[t]
            length += np.sqrt((off[t] ** 2).sum())
        mean /= m
        var = np.zeros(3)
        for t in range(m):
            var += (off[t] - mean) ** 2
        out[e, 0:3] = mean
        out[e, 3] = length / m
        out[e, 4:7] = np.sqrt(var / m)
    return out


def interface_features(points_p, points_q, anchors=None, k_interface=32, voxel=0.0):
    """Interface descriptor of the oriented pair p -> q (7 values).

    ``anchors`` is (gap, anchor_p, anchor_q) as returned by approximate_gap;
    computed when omitted.
    """
    pos, order, offsets, sproj, axes, _ = _pair_arrays(points_p, points_q)
    if anchors is None:
        anchors = approximate_gap(points_p, points_q)
    gap, a_p, a_q = anchors
    np_ = offsets[1]
    ip = int(np.argmin(((pos[:np_] - a_p) ** 2).sum(axis=1)))
    iq = np_ + int(np.argmin(((pos[np_:] - a_q) ** 2).sum(axis=1)))
    out = _interface_kernel(pos, order, offsets, sproj, axes, np.array([[0, 1]], dtype=np.int64),
                            np.array([ip]), np.array([iq]), np.array([float(gap)]), 2.0 * voxel, k_interface)
    return out[0]


# -- ratio / pose ----------------------------------------------------------------


def ratio_features(scales_p, count_p, scales_q, count_q, floor=RATIO_FLOOR):
    """[length, surface, volume, count] ratios p / q, both terms floored at ``floor``.

    ``scales`` are sqrt-eigenvalues in descending order (one row per pair, or one pair).
    """
    sp = np.atleast_2d(scales_p)
    sq = np.atleast_2d(scales_q)

    def measures(s, n):
        return np.stack([s[:, 0], s[:, 0] * s[:, 1], s[:, 0] * s[:, 1] * s[:, 2],
                         np.asarray(n, dtype=np.float64).reshape(-1)], axis=1)

    a = np.maximum(measures(sp, count_p), floor)
    b = np.maximum(measures(sq, count_q), floor)
    out = a / b
    return out[0] if np.ndim(scales_p) == 1 else out


def _abs_cos(a, b):
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    ok = (na > 0) & (nb > 0)
    c = np.abs(np.sum(a * b, axis=-1)) / np.where(ok, na * nb, 1.0)
    return np.where(ok, np.clip(c, 0.0, 1.0), 0.0)


def pose_features(normal_p, normal_q, centroid_p, centroid_q, mean_offset):
    """[|cos| n_p.n_q, |cos| n_p.offset, |cos| n_q.offset, centroid distance, unit centroid offset (3)]."""
    n_p, n_q = np.atleast_2d(normal_p), np.atleast_2d(normal_q)
    off = np.atleast_2d(mean_offset)
    delta = np.atleast_2d(centroid_q) - np.atleast_2d(centroid_p)
    dist = np.linalg.norm(delta, axis=1)
    unit = delta / np.where(dist > 0, dist, 1.0)[:, None]
    out = np.column_stack([_abs_cos(n_p, n_q), _abs_cos(n_p, off), _abs_cos(n_q, off), dist, unit])
    return out[0] if np.ndim(normal_p) == 1 else out


def adjacency_features(positions, point_index, n_components, pairs, anchor_p, anchor_q, gaps,
                       voxel=0.0, k_interface=32, shapes=None, members=None):
    """E x 18 features for unordered pairs (p < q), returned for both orientations.

    Returns (edges 2E x 2, features 2E x 18, gaps 2E); row e is p -> q and row
    E + e is q -> p.
    """
    positions = relative_positions(positions)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if shapes is None:
        shapes = superpoint_shapes(positions, point_index, n_components)
    if members is None:
        members = sorted_members(positions, point_index, n_components, shapes.axes)
    order, offsets, sproj = members
    inter = _interface_kernel(positions, order, offsets, sproj, shapes.axes, pairs, np.asarray(anchor_p, dtype=np.int64),
                              np.asarray(anchor_q, dtype=np.int64), np.asarray(gaps, dtype=np.float64),
                              2.0 * voxel, int(k_interface))
    p, q = pairs[:, 0], pairs[:, 1]
    fwd = np.empty((len(pairs), FEATURE_DIM))
    bwd = np.empty((len(pairs), FEATURE_DIM))
    # reverse orientation: offsets negate, lengths and spreads are unchanged
    fwd[:, INTERFACE] = inter
    bwd[:, INTERFACE] = inter
    bwd[:, 0:3] = -inter[:, 0:3]
    fwd[:, RATIO] = ratio_features(shapes.scales[p], shapes.counts[p], shapes.scales[q], shapes.counts[q])
    bwd[:, RATIO] = ratio_features(shapes.scales[q], shapes.counts[q], shapes.scales[p], shapes.counts[p])
    fwd[:, POSE] = pose_features(shapes.normals[p], shapes.normals[q], shapes.centroids[p],
                                 shapes.centroids[q], inter[:, 0:3])
    bwd[:, POSE] = fwd[:, POSE]
    bwd[:, 12], bwd[:, 13] = fwd[:, 13], fwd[:, 12]
    bwd[:, 15:18] = -fwd[:, 15:18]
    edges = np.concatenate([pairs, pairs[:, ::-1]])
    return edges, np.concatenate([fwd, bwd]), np.concatenate([gaps, gaps])


# -- graph ------------------------------------------------------------------------


def candidate_pairs(centroids, radii, eps, n_classes=8):
    """Unordered pairs (p < q) with centroid distance <= r_p + r_q + eps.

    Superpoints are bucketed by radius so each radius query only pays for the
    largest radius of the bucket it searches.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    s = len(centroids)
    if s < 2:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.unique(np.quantile(radii, np.linspace(0, 1, n_classes + 1)[1:-1]))
    bucket = np.searchsorted(edges, radii, side="left")
    found = []
    for b in np.unique(bucket):
        members = np.flatnonzero(bucket == b)
        reach = radii + radii[members].max() + eps
        lists = neighbors_within(centroids[members], centroids, reach)
        lens = np.fromiter((len(x) for x in lists), dtype=np.int64, count=s)
        if lens.sum() == 0:
            continue
        src = np.repeat(np.arange(s), lens)
        dst = members[np.concatenate(lists)]
        keep = src < dst
        found.append(src[keep] * s + dst[keep])
    if not found:
        return np.zeros((0, 2), dtype=np.int64)
    key = np.unique(np.concatenate(found))
    pairs = np.stack([key // s, key % s], axis=1)
    d = np.linalg.norm(centroids[pairs[:, 0]] - centroids[pairs[:, 1]], axis=1)
    return pairs[d <= radii[pairs[:, 0]] + radii[pairs[:, 1]] + eps]


def default_epsilon(level, voxel):
    """Gap threshold of ``level``: 3 voxels at level 1, doubled at every level."""
    return 3.0 * voxel * 2.0 ** (level - 1)


def build_superpoint_graph(hp, level, positions=None, eps=None, num_steps=3, voxel=0.03,
                           k_interface=32, with_features=True):
    """Superpoint graph of ``level`` (1..I) of hierarchical partition ``hp``."""
    if not 1 <= level <= hp.level_count:
        raise ValueError(f"level must be in 1..{hp.level_count}")
    eps = default_epsilon(level, voxel) if eps is None else float(eps)
    if not eps > 0:
        raise ValueError("eps must be > 0")
    positions = relative_positions(hp.positions if positions is None else positions)
    point_index = hp.point_index(level)
    s = hp.size(level)
    shapes = superpoint_shapes(positions, point_index, s)
    dist = np.linalg.norm(positions - shapes.centroids[point_index], axis=1)
    radii = np.zeros(s)
    np.maximum.at(radii, point_index, dist)
    pairs = candidate_pairs(shapes.centroids, radii, eps)
    members = sorted_members(positions, point_index, s, shapes.axes)
    gaps, ap, aq, _ = _gap_kernel(positions, *members, shapes.axes, shapes.centroids, pairs, num_steps)
    keep = gaps <= eps
    pairs, gaps, ap, aq = pairs[keep], gaps[keep], ap[keep], aq[keep]
    if with_features:
        edges, feats, gaps2 = adjacency_features(positions, point_index, s, pairs, ap, aq, gaps,
                                                 voxel=voxel, k_interface=k_interface, shapes=shapes,
                                                 members=members)
    else:
        edges = np.concatenate([pairs, pairs[:, ::-1]])
        feats = np.zeros((len(edges), FEATURE_DIM))
        gaps2 = np.concatenate([gaps, gaps])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return SuperpointGraph(level, edges[order], feats[order], gaps2[order], eps)
