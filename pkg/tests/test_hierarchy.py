import numpy as np
import pytest

from superpart.cut_pursuit import Partition
from superpart.errors import NonBracketingError
from superpart.hierarchy import (build_hierarchy, component_stats, hierarchy_from_indices, reduce_graph,
                                 tune_lambda)
from superpart.neighborhood import WeightedGraph, build_knn_graph


def blocky_scene(rng, n=1500):
    pts = rng.random((n, 3)) * [4, 2, 1]
    cell = np.floor(pts[:, :2]).astype(int)
    f = np.c_[(cell[:, 0] % 2), (cell[:, 1] + cell[:, 0]) % 3].astype(float)
    f += rng.normal(0, 0.05, f.shape)
    return pts, f, build_knn_graph(pts, 8)


def test_hierarchy_invariants(rng):
    pts, f, g = blocky_scene(rng)
    hp = build_hierarchy(f, g, pts, [0.02, 0.5, 5.0])
    assert hp.level_count == 3 and hp.check_nesting()
    sizes = hp.sizes()
    assert sizes[0] == len(pts) and all(a >= b for a, b in zip(sizes, sizes[1:]))
    for i in range(1, 4):
        idx = hp.point_index(i)
        st = hp.level_stats(i)
        for c in range(hp.size(i)):
            np.testing.assert_allclose(st.mean_features[c], f[idx == c].mean(axis=0), atol=1e-9)
            assert st.point_counts[c] == (idx == c).sum()
        # the next level is solved on these means
        assert hp.graphs[i - 1].node_count == hp.size(i)
        assert hp.graphs[i - 1].weights.sum() <= g.weights.sum() + 1e-9
    assert hp.children(1, 0).tolist() == np.flatnonzero(hp.parent(1) == 0).tolist()


def test_reduce_graph_conserves_crossing_weight(rng):
    g = build_knn_graph(rng.random((200, 3)), 6)
    g.weights = rng.uniform(0.5, 2, len(g.weights))
    si = rng.integers(0, 7, 200)
    _, si = np.unique(si, return_inverse=True)
    r = reduce_graph(g, si)
    crossing = si[g.edges[:, 0]] != si[g.edges[:, 1]]
    assert r.weights.sum() == pytest.approx(g.weights[crossing].sum(), rel=1e-12)
    assert np.all(r.edges[:, 0] < r.edges[:, 1])
    assert len(np.unique(r.edges, axis=0)) == len(r.edges)


def test_component_stats_radii():
    pos = np.array([[0, 0, 0], [2, 0, 0], [5, 5, 5]], float)
    st = component_stats(pos, np.ones((3, 1)), np.array([0, 0, 1]), 2)
    np.testing.assert_allclose(st.centroids, [[1, 0, 0], [5, 5, 5]])
    np.testing.assert_allclose(st.radii, [1, 0])


def test_build_hierarchy_rejects_bad_input(rng):
    pts, f, g = blocky_scene(rng, 100)
    with pytest.raises(ValueError):
        build_hierarchy(f, g, pts, [])
    with pytest.raises(ValueError):
        build_hierarchy(f, g, pts, [0.0])
    with pytest.raises(ValueError):
        build_hierarchy(f[:50], g, pts, [1.0])


def test_tune_lambda_hits_target(rng):
    pts, f, g = blocky_scene(rng, 3000)
    f = f + rng.normal(0, 0.3, f.shape)
    lam, part = tune_lambda(f, g, target_ratio=30, bounds=(1e-3, 10), return_partition=True)
    assert abs(part.num_components - 100) <= 20


def test_tune_lambda_non_bracketing(rng):
    pts, f, g = blocky_scene(rng, 300)
    with pytest.raises(NonBracketingError) as info:
        tune_lambda(f, g, target_ratio=2, bounds=(100.0, 1000.0))
    assert info.value.best_lambda in (100.0, 1000.0)
    with pytest.raises(ValueError):
        tune_lambda(f, g, bounds=(1.0, 0.5))


def test_hierarchy_from_indices():
    pos = np.arange(12, dtype=float).reshape(4, 3)
    hp = hierarchy_from_indices(pos, np.arange(4.0), [[1, 1, 0, 2], [0, 1, 0]])
    assert hp.sizes() == [4, 3, 2]
    assert hp.point_index(2).tolist() == [1, 1, 0, 0]
    np.testing.assert_allclose(hp.level_stats(2).mean_features[:, 0], [2.5, 0.5])
    assert hp.check_nesting() and isinstance(hp.levels[0], Partition)
    with pytest.raises(ValueError):
        hierarchy_from_indices(pos, np.arange(4.0), [[0, 0, 2, 2]])


def test_isolated_nodes_stay_apart():
    g = WeightedGraph(3, np.array([[0, 1]]), np.ones(1))
    hp = build_hierarchy(np.zeros((3, 1)), g, np.zeros((3, 3)), [100.0])
    assert hp.size(1) == 2
