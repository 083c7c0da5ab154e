import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superpart.cut_pursuit import (Partition, SolverConfig, brute_force_partition, canonical_labels,
                                   check_connected_components, energy, level_set_partition, make_partition,
                                   minimize_l0)
from superpart.neighborhood import WeightedGraph, build_knn_graph
from superpart.parallel import set_threads

from conftest import random_graph


def path(n):
    return WeightedGraph(n, np.c_[np.arange(n - 1), np.arange(1, n)], np.ones(n - 1))


def direct_energy(values, f, graph, lam):
    total = 0.0
    for i in range(len(f)):
        total += float(np.sum((values[i] - f[i]) ** 2))
    for (a, b), w in zip(graph.edges, graph.weights):
        if np.any(values[a] != values[b]):
            total += lam * w
    return total


def edge_subset_optimum(f, graph, lam):
    """Minimum of J over all kept-edge subsets (components of kept edges, block means)."""
    n, e = len(f), len(graph.edges)
    best = np.inf
    for keep in itertools.product([0, 1], repeat=e):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        for (a, b), k in zip(graph.edges, keep):
            if k:
                parent[find(a)] = find(b)
        roots = [find(i) for i in range(n)]
        values = np.empty_like(f)
        for r in set(roots):
            idx = [i for i in range(n) if roots[i] == r]
            values[idx] = f[idx].mean(axis=0)
        best = min(best, direct_energy(values, f, graph, lam))
    return best


def test_two_node_energies():
    g = path(2)
    f = np.array([[0.0], [10.0]])
    assert energy(f, f, g, 1.0) == 1.0
    assert energy(np.array([[5.0], [5.0]]), f, g, 1.0) == 50.0
    p = minimize_l0(f, g, SolverConfig(lam=1.0))
    assert p.num_components == 2 and energy(p, f, g, 1.0) == 1.0


def test_energy_of_signal_equal_to_f(rng):
    g = random_graph(rng, 8)
    f = rng.integers(0, 3, (8, 1)).astype(float)
    cut = sum(w for (a, b), w in zip(g.edges, g.weights) if f[a, 0] != f[b, 0])
    assert energy(f, f, g, 2.5) == pytest.approx(2.5 * cut)


def test_energy_matches_direct_sum(rng):
    for _ in range(10):
        g = random_graph(rng, 6)
        g.weights = rng.uniform(0.1, 2, len(g.weights))
        f = rng.normal(size=(6, 2))
        e = rng.normal(size=(6, 2))
        e[1] = e[0]
        assert energy(e, f, g, 0.7) == pytest.approx(direct_energy(e, f, g, 0.7), rel=1e-12)


def test_energy_partition_uses_ids():
    g = path(2)
    f = np.array([[1.0], [1.0]])
    p = Partition(np.array([0, 1]), np.array([[1.0], [1.0]]), np.array([1, 1]))
    # equal values but different components: the edge is cut
    assert energy(p, f, g, 3.0) == 3.0
    with pytest.raises(ValueError):
        energy(np.zeros((3, 1)), f, g, 1.0)


def test_lambda_zero_plateaus():
    f = np.array([0, 0, 0, 5, 5, 2, 2, 2], float)[:, None]
    p = minimize_l0(f, path(8), SolverConfig(lam=0.0))
    assert p.super_index.tolist() == [0, 0, 0, 1, 1, 2, 2, 2]


def test_huge_lambda_one_component_per_graph_component(rng):
    f = rng.normal(size=(10, 1))
    g = WeightedGraph(10, [[0, 1], [1, 2], [2, 3], [3, 4], [5, 6], [6, 7], [7, 8], [8, 9]], np.ones(8))
    p = minimize_l0(f, g, SolverConfig(lam=1e6))
    assert p.super_index.tolist() == [0] * 5 + [1] * 5
    np.testing.assert_allclose(p.component_value[:, 0], [f[:5].mean(), f[5:].mean()])


def test_means_and_sizes(rng):
    g = build_knn_graph(rng.random((300, 3)), 5)
    f = rng.normal(size=(300, 2))
    p = minimize_l0(f, g, SolverConfig(lam=0.5))
    for c in range(p.num_components):
        members = p.super_index == c
        np.testing.assert_allclose(p.component_value[c], f[members].mean(axis=0), atol=1e-9)
        assert p.component_size[c] == members.sum()
    assert check_connected_components(p, g)


def test_trace_non_increasing_and_deterministic(rng):
    pts = rng.random((2000, 3))
    g = build_knn_graph(pts, 8)
    f = np.c_[pts[:, 0] > 0.5, pts[:, 1] > 0.3].astype(float) + rng.normal(0, 0.1, (2000, 2))
    a = minimize_l0(f, g, SolverConfig(lam=0.05))
    assert all(y <= x * (1 + 1e-9) + 1e-12 for x, y in zip(a.energy_trace, a.energy_trace[1:]))
    b = minimize_l0(f, g, SolverConfig(lam=0.05))
    assert np.array_equal(a.super_index, b.super_index)
    set_threads(4)
    try:
        c = minimize_l0(f, g, SolverConfig(lam=0.05, parallel=True))
    finally:
        set_threads(None)
    assert np.array_equal(a.super_index, c.super_index)


def test_node_weights_shift_the_mean():
    f = np.array([[0.0], [1.0]])
    p = minimize_l0(f, path(2), SolverConfig(lam=10.0), node_weight=[3.0, 1.0])
    assert p.num_components == 1 and p.component_value[0, 0] == pytest.approx(0.25)


def test_brute_force_small_cases():
    p = brute_force_partition(np.array([[2.0]]), WeightedGraph(1, np.zeros((0, 2)), []), 1.0)
    assert p.num_components == 1 and p.component_value[0, 0] == 2.0 and p.energy_trace == [0.0]
    p = brute_force_partition(np.array([[0.0], [10.0]]), path(2), 1.0)
    assert p.num_components == 2 and p.energy_trace[0] == 1.0
    with pytest.raises(ValueError):
        brute_force_partition(np.zeros((13, 1)), path(13), 1.0)


def test_brute_force_matches_edge_subset_enumeration(rng):
    for _ in range(15):
        g = random_graph(rng, 5, p=0.4)
        f = rng.normal(size=(5, 1)) * 3
        lam = float(rng.choice([0.1, 1.0, 10.0]))
        bf = brute_force_partition(f, g, lam)
        assert energy(bf, f, g, lam) == pytest.approx(edge_subset_optimum(f, g, lam), rel=1e-12, abs=1e-12)


def test_brute_force_tie_lexicographic():
    # identical values: one block beats everything; with lam = 0 all labelings tie at 0
    f = np.zeros((3, 1))
    assert brute_force_partition(f, path(3), 0.0).super_index.tolist() == [0, 0, 0]


@given(st.integers(0, 2**32 - 1), st.floats(0.5, 4.0))
def test_brute_force_scaling(seed, c):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 6, p=0.4)
    f = rng.normal(size=(6, 1))
    a = brute_force_partition(f, g, 0.3)
    b = brute_force_partition(f * c, g, 0.3 * c * c)
    assert np.array_equal(a.super_index, b.super_index)
    assert b.energy_trace[0] == pytest.approx(c * c * a.energy_trace[0], rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_solver_within_trivial_bounds(seed, lam):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    g = random_graph(rng, n, p=0.5)
    f = rng.normal(size=(n, 2)) * rng.uniform(0.1, 10)
    p = minimize_l0(f, g, SolverConfig(lam=lam))
    mean = np.repeat(f.mean(axis=0, keepdims=True), n, axis=0)
    e = energy(p, f, g, lam)
    assert e <= energy(f, f, g, lam) + 1e-9
    assert e <= energy(mean, f, g, lam) + 1e-9
    assert check_connected_components(p, g)


def test_canonical_labels_and_level_sets():
    lab, s = canonical_labels(np.array([7, 7, 2, 9, 2]))
    assert lab.tolist() == [0, 0, 1, 2, 1] and s == 3
    lab, s = canonical_labels(np.array([10**12, 5, 10**12]))
    assert lab.tolist() == [0, 1, 0] and s == 2
    f = np.array([1, 1, 2, 1], float)
    assert level_set_partition(f, path(4)).tolist() == [0, 0, 1, 2]
    p = make_partition(f, [1, 1, 0, 2])
    assert p.super_index.tolist() == [0, 0, 1, 2] and p.component_size.tolist() == [2, 1, 1]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(lam=-1)
    with pytest.raises(ValueError):
        SolverConfig(max_outer_iters=0)
    with pytest.raises(ValueError):
        minimize_l0(np.zeros((3, 1)), path(2))
