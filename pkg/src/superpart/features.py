"""Handcrafted point features.

Geometric block (in this order): linearity, planarity, scattering, verticality,
elevation.  Dimensionality uses square-rooted PCA eigenvalues; verticality is the
vertical share of the eigenvalue-weighted sum of absolute eigenvectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud_io import PointCloud, voxel_subsample
from .errors import EstimationError
from .neighborhood import knn_indices

GEOMETRIC_NAMES = ("linearity", "planarity", "scattering", "verticality", "elevation")


@dataclass
class GroundPlane:
    normal: np.ndarray
    offset: float
    inlier_count: int

    def signed_distance(self, positions):
        return np.asarray(positions, dtype=np.float64) @ self.normal - self.offset


@dataclass
class RansacConfig:
    iterations: int = 500
    inlier_threshold: float = 0.1
    coarse_voxel: float = 0.5
    seed: int = 0
    max_tilt_deg: float = 45.0


@dataclass
class FeatureConfig:
    k_feat: int = 50
    mu: float = 0.0
    divisor: float = 4.0
    include_spatial: bool = False
    ransac: RansacConfig = field(default_factory=RansacConfig)


@dataclass
class PointFeatureTable:
    geometric: np.ndarray
    radiometric: np.ndarray
    spatial: np.ndarray | None = None

    def matrix(self):
        """Concatenation [geometric | radiometric | spatial]."""
        blocks = [self.geometric, self.radiometric]
        if self.spatial is not None:
            blocks.append(self.spatial)
        return np.hstack(blocks)

    @property
    def dim(self):
        return self.matrix().shape[1]


def covariance_eigh(cov):
    """Eigen-decomposition of stacked symmetric 3x3 matrices, descending order.

    Eigenvalues are clamped at 0.  Eigenvectors are returned column-wise
    (``vecs[..., :, j]`` pairs with ``vals[..., j]``).  All-zero matrices get the
    canonical axes.
    """
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals[..., ::-1], 0.0, None)
    vecs = vecs[..., :, ::-1]
    zero = np.all(cov == 0, axis=(-2, -1))
    if np.any(zero):
        vals[zero] = 0.0
        vecs[zero] = np.eye(3)
    return vals, vecs


def local_pca(positions, neighbor_table, chunk=100_000):
    """Per-point PCA over the point and its neighbors (centered on their mean)."""
    positions = np.asarray(positions, dtype=np.float64)
    table = np.asarray(neighbor_table)
    if table.shape[1] < 3:
        raise ValueError("need at least 3 neighbors")
    n = len(positions)
    vals = np.empty((n, 3))
    vecs = np.empty((n, 3, 3))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        idx = np.concatenate([np.arange(start, stop)[:, None], table[start:stop]], axis=1)
        pts = positions[idx]
        pts = pts - pts.mean(axis=1, keepdims=True)
        cov = np.einsum("nki,nkj->nij", pts, pts) / idx.shape[1]
        vals[start:stop], vecs[start:stop] = covariance_eigh(cov)
    return vals, vecs


def dimensionality_features(eigenvalues, eigenvectors):
    """Return (linearity, planarity, scattering, verticality); all zero where s1 = 0."""
    s = np.sqrt(np.clip(eigenvalues, 0.0, None))
    s1 = s[:, 0]
    ok = s1 > 0
    safe = np.where(ok, s1, 1.0)
    linearity = np.where(ok, (s[:, 0] - s[:, 1]) / safe, 0.0)
    planarity = np.where(ok, (s[:, 1] - s[:, 2]) / safe, 0.0)
    scattering = np.where(ok, s[:, 2] / safe, 0.0)
    u = np.einsum("nij,nj->ni", np.abs(eigenvectors), s)
    norm = np.linalg.norm(u, axis=1)
    verticality = np.where(norm > 0, u[:, 2] / np.where(norm > 0, norm, 1.0), 0.0)
    return (np.clip(linearity, 0, 1), np.clip(planarity, 0, 1),
            np.clip(scattering, 0, 1), np.clip(verticality, 0, 1))


def _fit_plane_pca(points):
    center = points.mean(axis=0)
    q = points - center
    vals, vecs = covariance_eigh(q.T @ q / len(q))
    normal = vecs[:, 2]
    return normal, float(normal @ center), vals


def estimate_ground_plane(cloud, config=None):
    """RANSAC ground plane on a coarse voxel subsampling of ``cloud``.

    The best 3-point hypothesis (most inliers, first found on ties) is refit by PCA
    on its inliers.  The normal is oriented upward (n_z >= 0); a vertical plane is
    oriented so that most points lie on or above it.  ``inlier_count`` is counted
    on the full-resolution cloud.
    """
    config = config or RansacConfig()
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    if len(cloud) < 3:
        raise EstimationError("ground plane needs at least 3 points")
    coarse, _ = voxel_subsample(PointCloud(cloud.positions), config.coarse_voxel)
    pts = coarse.positions if len(coarse) >= 3 else cloud.positions
    rng = np.random.default_rng(config.seed)
    m = len(pts)
    samples = np.stack([rng.choice(m, 3, replace=False) for _ in range(config.iterations)])
    p0, p1, p2 = pts[samples[:, 0]], pts[samples[:, 1]], pts[samples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    scale = max(np.ptp(pts, axis=0).max(), 1e-12)
    valid = norms > 1e-12 * scale * scale
    if not valid.any():
        raise EstimationError("all points are collinear")
    normals[valid] /= norms[valid, None]
    normals[normals[:, 2] < 0] *= -1
    offsets = np.einsum("ij,ij->i", normals, p0)
    # a ground hypothesis is near-horizontal and has most points on or above it
    grounded = valid & (normals[:, 2] >= np.cos(np.radians(config.max_tilt_deg)))
    counts = np.full(len(samples), -1)
    for start in range(0, len(samples), 64):
        sl = slice(start, start + 64)
        signed = normals[sl] @ pts.T - offsets[sl, None]
        inl = (np.abs(signed) <= config.inlier_threshold).sum(axis=1)
        above = (signed >= -config.inlier_threshold).sum(axis=1) * 2 >= m
        grounded[sl] &= above
        counts[sl] = np.where(valid[sl], inl, -1)
    pool = grounded if grounded.any() else valid
    best = int(np.argmax(np.where(pool, counts, -1)))
    normal, offset = normals[best], offsets[best]
    inliers = np.abs(pts @ normal - offset) <= config.inlier_threshold
    if inliers.sum() >= 3:
        refit_n, refit_d, vals = _fit_plane_pca(pts[inliers])
        if vals[1] > 1e-12 * vals[0]:  # inliers not collinear
            normal, offset = refit_n, refit_d
    if normal[2] < 0 or (normal[2] == 0 and np.sum(cloud.positions @ normal - offset < 0) > len(cloud) / 2):
        normal, offset = -normal, -offset
    normal = normal / np.linalg.norm(normal)
    full = int(np.sum(np.abs(cloud.positions @ normal - offset) <= config.inlier_threshold))
    return GroundPlane(normal, float(offset), full)


def elevation_feature(cloud, plane, divisor):
    if not divisor > 0:
        raise ValueError("divisor must be > 0")
    positions = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud)
    return np.clip(plane.signed_distance(positions) / divisor, 0.0, 1.0)


def assemble_point_features(cloud, config=None, neighbor_table=None, plane=None):
    """Full point feature table for ``cloud``.

    ``neighbor_table`` (N x k_feat) and ``plane`` may be passed to reuse earlier
    results.
    """
    config = config or FeatureConfig()
    if neighbor_table is None:
        neighbor_table = knn_indices(cloud.positions, config.k_feat)
    vals, vecs = local_pca(cloud.positions, neighbor_table[:, :config.k_feat])
    lin, pla, sca, ver = dimensionality_features(vals, vecs)
    if plane is None:
        plane = estimate_ground_plane(cloud, config.ransac)
    elev = elevation_feature(cloud, plane, config.divisor)
    geometric = np.stack([lin, pla, sca, ver, elev], axis=1)
    spatial = config.mu * cloud.positions if config.include_spatial else None
    return PointFeatureTable(geometric, cloud.radiometry.copy(), spatial)


def partition_signal(table, use_elevation=False, geometric_weight=1.0, radiometric_weight=1.0,
                     spatial_weight=1.0):
    """Signal fed to the partition: weighted geometric, radiometric and spatial blocks."""
    geo = table.geometric if use_elevation else table.geometric[:, :4]
    blocks = [geometric_weight * geo, radiometric_weight * table.radiometric]
    if table.spatial is not None:
        blocks.append(spatial_weight * table.spatial)
    return np.hstack(blocks)
