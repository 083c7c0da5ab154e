import numpy as np
import pytest

from superpart.cloud_io import PointCloud
from superpart.errors import EstimationError
from superpart.features import (FeatureConfig, GroundPlane, RansacConfig, assemble_point_features,
                                dimensionality_features, elevation_feature, estimate_ground_plane, local_pca,
                                partition_signal)
from superpart.neighborhood import knn_indices


def _single(vals, vecs=None):
    vecs = np.eye(3)[None] if vecs is None else vecs[None]
    return [float(x[0]) for x in dimensionality_features(np.asarray(vals, float)[None], vecs)]


def test_pca_collinear():
    pts = np.c_[np.arange(10.0), np.zeros(10), np.zeros(10)]
    vals, vecs = local_pca(pts, knn_indices(pts, 4))
    assert np.allclose(vals[:, 1:], 0)
    assert np.allclose(np.abs(vecs[:, :, 0]), [1, 0, 0])


def test_pca_planar(rng):
    pts = np.c_[rng.random((200, 2)), np.zeros(200)]
    vals, vecs = local_pca(pts, knn_indices(pts, 10))
    assert np.allclose(vals[:, 2], 0, atol=1e-15)
    assert np.allclose(np.abs(vecs[:, :, 2]), [0, 0, 1])


def test_pca_isotropic(rng):
    n = 2000
    pts = rng.normal(size=(n, 3))
    table = np.array([np.delete(np.arange(n), i) for i in range(n)])
    vals, _ = local_pca(pts, table, chunk=100)
    # every row sees the whole sample; spread of extreme eigenvalues is about 2 sqrt(3 / n)
    assert np.all(np.abs(vals[0] - 1) < 3 * 2 * np.sqrt(3 / n))


def test_pca_matches_characteristic_polynomial(rng):
    for _ in range(20):
        pts = rng.normal(size=(20, 3)) * rng.uniform(0.1, 2, 3)
        vals, _ = local_pca(pts, np.array([np.arange(1, 20)] + [[0] * 19] * 19))
        c = np.cov(pts.T, bias=True)
        # coefficients of det(c - x I)
        tr = np.trace(c)
        m2 = (tr ** 2 - np.trace(c @ c)) / 2
        roots = np.sort(np.roots([1, -tr, m2, -np.linalg.det(c)]).real)[::-1]
        np.testing.assert_allclose(vals[0], roots, atol=1e-9)


def test_pca_degenerate_identical_points():
    pts = np.zeros((5, 3))
    vals, vecs = local_pca(pts, knn_indices(pts, 3))
    assert np.all(vals == 0) and np.allclose(vecs[0], np.eye(3))


def test_dimensionality_cases():
    assert _single([1, 0, 0])[:3] == [1, 0, 0]
    assert _single([1, 1, 1])[:3] == [0, 0, 1]
    assert _single([0, 0, 0]) == [0, 0, 0, 0]
    lin, pla, sca, ver = _single([1, 1, 0])
    assert (lin, pla, sca) == (0, 1, 0)
    # horizontal plane: the x and y eigenvectors have no vertical part
    assert ver == 0.0


def test_verticality_formula():
    lin, pla, sca, ver = _single([4, 1, 0])
    # u = 2|e1| + 1|e2| with e1 = x, e2 = y, e3 = z
    assert ver == 0.0
    vecs = np.eye(3)[:, [2, 0, 1]]
    ver2 = _single([4, 1, 0], vecs)[3]
    assert ver2 == pytest.approx(2 / np.sqrt(5))


def test_ground_plane_exact_with_outlier():
    g = np.stack(np.meshgrid(np.linspace(0, 5, 20), np.linspace(0, 5, 20)), -1).reshape(-1, 2)
    pts = np.vstack([np.c_[g, np.zeros(len(g))], [[2, 2, 3.0]]])
    plane = estimate_ground_plane(PointCloud(pts), RansacConfig(inlier_threshold=0.05))
    np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-12)
    assert abs(plane.offset) < 1e-12 and plane.inlier_count == len(pts) - 1


def test_ground_plane_tilted():
    g = np.stack(np.meshgrid(np.linspace(0, 5, 30), np.linspace(0, 5, 30)), -1).reshape(-1, 2)
    t = np.radians(10)
    pts = np.c_[g[:, 0] * np.cos(t), g[:, 1], g[:, 0] * np.sin(t)]
    plane = estimate_ground_plane(PointCloud(pts), RansacConfig(inlier_threshold=0.01, coarse_voxel=0.2))
    expect = np.array([-np.sin(t), 0, np.cos(t)])
    assert np.arccos(min(1.0, abs(plane.normal @ expect))) < 1e-6


def test_ground_plane_deterministic_and_errors(rng):
    pts = np.c_[rng.random((500, 2)) * 5, rng.normal(0, 0.01, 500)]
    a = estimate_ground_plane(PointCloud(pts), RansacConfig(seed=3))
    b = estimate_ground_plane(PointCloud(pts), RansacConfig(seed=3))
    assert np.array_equal(a.normal, b.normal) and a.offset == b.offset
    with pytest.raises(EstimationError):
        estimate_ground_plane(PointCloud(np.zeros((2, 3))))


def test_elevation():
    plane = GroundPlane(np.array([0, 0, 1.0]), 0.0, 0)
    e = elevation_feature(np.array([[0, 0, 0], [0, 0, 4], [0, 0, 50], [0, 0, -1]], float), plane, 4.0)
    assert e.tolist() == [0, 1, 1, 0]
    assert elevation_feature(np.array([[0, 0, 50.0]]), plane, 20.0).tolist() == [1.0]
    with pytest.raises(ValueError):
        elevation_feature(np.zeros((1, 3)), plane, 0)


def test_assemble_dims_and_ranges(rng):
    pts = np.c_[rng.random((400, 2)) * 3, rng.random(400) * 0.2]
    rgb = PointCloud(pts, rng.random((400, 3)))
    t = assemble_point_features(rgb, FeatureConfig(k_feat=20))
    assert t.geometric.shape == (400, 5) and t.dim == 8
    assert np.all((t.geometric >= 0) & (t.geometric <= 1))
    inten = PointCloud(pts, rng.random((400, 1)))
    assert assemble_point_features(inten, FeatureConfig(k_feat=20)).dim == 6
    sp = assemble_point_features(rgb, FeatureConfig(k_feat=20, mu=0.1, include_spatial=True))
    np.testing.assert_allclose(sp.spatial, 0.1 * pts)
    assert partition_signal(t).shape == (400, 7)
    assert partition_signal(t, use_elevation=True).shape == (400, 8)


def test_translation_and_rotation_behaviour(rng):
    pts = rng.normal(size=(300, 3)) * [2, 1, 0.3]
    table = knn_indices(pts, 15)
    base = dimensionality_features(*local_pca(pts, table))
    shifted = dimensionality_features(*local_pca(pts + [100, -50, 7], table))
    for a, b in zip(base, shifted):
        np.testing.assert_allclose(a, b, atol=1e-9)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rot = dimensionality_features(*local_pca(pts @ q.T, table))
    for a, b in zip(base[:3], rot[:3]):
        np.testing.assert_allclose(a, b, atol=1e-9)
    # |eigenvector| sums are unchanged by quarter turns about the vertical axis
    rz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    vert = dimensionality_features(*local_pca(pts @ rz.T, table))[3]
    np.testing.assert_allclose(vert, base[3], atol=1e-9)
    # but not by tilting the vertical
    tilted = dimensionality_features(*local_pca(pts @ q.T, table))[3]
    assert np.abs(tilted - base[3]).max() > 1e-3
