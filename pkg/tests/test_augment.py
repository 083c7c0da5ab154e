import math

import numpy as np
import pytest

from superpart.hierarchy import hierarchy_from_indices
from superpart.kernel.augment import sample_count, sample_superpoint_points, superpoint_dropout


def three_level(rng, sizes=(400, 60, 8), n_points=2000):
    maps, prev = [], n_points
    for s in sizes:
        maps.append(rng.permutation(np.r_[np.arange(s), rng.integers(0, s, prev - s)]))
        prev = s
    return hierarchy_from_indices(np.zeros((n_points, 3)), np.zeros(n_points), maps)


def test_sample_count_examples():
    assert sample_count(128, 32, 128) == 97 == round(128 * math.tanh(1))
    assert sample_count(10, 32, 128) == 10
    assert sample_count(40, 32, 128) == 32
    assert sample_count(10_000, 32, 128) == 10_000
    assert sample_count(2000, 32, 128) / 2000 > 0.99
    with pytest.raises(ValueError):
        sample_count(10, 0, 128)


def test_sampling_is_seeded_subset(rng):
    hp = three_level(rng)
    a = sample_superpoint_points(hp, 32, 128, seed=3)
    b = sample_superpoint_points(hp, 32, 128, seed=3)
    parent = hp.parent(1)
    for p, (x, y) in enumerate(zip(a, b)):
        assert np.array_equal(x, y) and np.all(np.diff(x) > 0)
        assert np.all(parent[x] == p)
        assert len(x) == sample_count(int((parent == p).sum()), 32, 128)


def test_dropout_zero_is_identity(rng):
    hp = three_level(rng)
    v = superpoint_dropout(hp, 0.0, seed=1)
    assert all(k.all() for k in v.keep)


def test_dropout_subtree_rule(rng):
    hp = three_level(rng)
    for seed in range(20):
        v = superpoint_dropout(hp, 0.3, seed)
        for i in range(hp.level_count - 1, 0, -1):
            assert np.array_equal(v.keep[i], v.keep[i + 1][hp.parent(i + 1)] & ~v.self_drop[i])
        assert np.array_equal(v.keep[0], v.keep[1][hp.parent(1)])
        for i in range(1, hp.level_count + 1):
            assert v.keep[i].any()
        dead = np.flatnonzero(~v.keep[2])
        assert not v.keep[0][np.isin(hp.point_index(2), dead)].any()


def test_dropout_survival_rate(rng):
    hp = hierarchy_from_indices(np.zeros((10_000, 3)), np.zeros(10_000), [np.arange(10_000)])
    v = superpoint_dropout(hp, 0.2, seed=0)
    sigma = math.sqrt(10_000 * 0.2 * 0.8)
    assert abs(v.keep[1].sum() - 8000) <= 3 * sigma


def test_dropout_redraws_empty_level():
    hp = hierarchy_from_indices(np.zeros((2, 3)), np.zeros(2), [[0, 0]])
    v = superpoint_dropout(hp, 0.9, seed=0)
    assert v.keep[1].all() and v.kept_index(0).tolist() == [0, 1]
    with pytest.raises(ValueError):
        superpoint_dropout(hp, 1.0)
