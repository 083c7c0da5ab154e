import numpy as np
import pytest
from hypothesis import given, strategies as st

from superpart.neighborhood import WeightedGraph, build_knn_graph, knn_indices, neighbors_within
from superpart.parallel import set_threads


def brute_knn(pts, k):
    d = ((pts[:, None] - pts[None]) ** 2).sum(axis=2)
    out = []
    for i in range(len(pts)):
        cand = sorted((d[i, j], j) for j in range(len(pts)) if j != i)
        out.append([j for _, j in cand[:k]])
    return np.array(out)


def test_collinear_k1():
    g = build_knn_graph(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float), 1)
    assert g.edges.tolist() == [[0, 1], [1, 2]] and g.weights.tolist() == [1, 1]


def test_two_points():
    g = build_knn_graph(np.array([[0, 0, 0], [1, 0, 0]], float), 1)
    assert g.edges.tolist() == [[0, 1]]


def test_square_corners():
    pts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    table = knn_indices(pts, 2)
    assert table.tolist() == [[1, 3], [0, 2], [1, 3], [0, 2]]


def test_duplicates_first():
    pts = np.array([[0, 0, 0], [5, 0, 0], [0, 0, 0], [1, 0, 0]], float)
    assert knn_indices(pts, 2)[0].tolist() == [2, 3]


@pytest.mark.parametrize("n,k", [(500, 10), (300, 50)])
def test_knn_matches_brute_force(rng, n, k):
    pts = rng.random((n, 3))
    assert np.array_equal(knn_indices(pts, k), brute_knn(pts, k))


def test_knn_ties_on_grid():
    g = np.stack(np.meshgrid(np.arange(6), np.arange(6), np.arange(3), indexing="ij"), -1).reshape(-1, 3)
    pts = g.astype(float)
    assert np.array_equal(knn_indices(pts, 8), brute_knn(pts, 8))


def test_graph_matches_brute_force(rng):
    pts = rng.random((500, 3))
    g = build_knn_graph(pts, 10)
    t = brute_knn(pts, 10)
    expect = {tuple(sorted((i, int(j)))) for i in range(500) for j in t[i]}
    assert set(map(tuple, g.edges.tolist())) == expect
    deg = np.bincount(g.edges.reshape(-1), minlength=500)
    assert deg.min() >= 10


@given(st.integers(0, 2**32 - 1))
def test_graph_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((60, 3))
    perm = rng.permutation(60)
    a = build_knn_graph(pts, 5)
    b = build_knn_graph(pts[perm], 5)
    relabeled = {tuple(sorted((int(perm[u]), int(perm[v])))) for u, v in b.edges}
    assert relabeled == set(map(tuple, a.edges.tolist()))


def test_knn_argument_errors(rng):
    with pytest.raises(ValueError):
        knn_indices(rng.random((3, 3)), 3)
    with pytest.raises(ValueError):
        knn_indices(rng.random((3, 3)), 0)


def test_neighbors_within(rng):
    pts = rng.random((300, 3))
    q = rng.random((20, 3))
    lists = neighbors_within(pts, q, 0.3)
    for i in range(20):
        expect = np.flatnonzero(np.linalg.norm(pts - q[i], axis=1) <= 0.3)
        assert lists[i].tolist() == expect.tolist()
    assert neighbors_within(pts, pts[7], 1e-9)[0].tolist() == [7]
    with pytest.raises(ValueError):
        neighbors_within(pts, q, 0.0)


def test_thread_count_does_not_change_results(rng):
    pts = rng.random((2000, 3))
    set_threads(1)
    a = knn_indices(pts, 10)
    set_threads(4)
    b = knn_indices(pts, 10)
    set_threads(None)
    assert np.array_equal(a, b)


def test_from_pairs_merges_and_validates():
    g = WeightedGraph.from_pairs(4, [0, 1, 2, 3], [1, 0, 2, 1], [1.0, 2.0, 5.0, 1.0])
    assert g.edges.tolist() == [[0, 1], [1, 3]] and g.weights.tolist() == [3.0, 1.0]
    g.validate()
    with pytest.raises(ValueError):
        WeightedGraph(2, [[0, 0]], [1.0]).validate()
    with pytest.raises(ValueError):
        WeightedGraph(2, [[0, 1]], [-1.0]).validate()
