import numpy as np
import pytest

from superpart.hierarchy import hierarchy_from_indices
from superpart.kernel.checks import toy_scene
from superpart.kernel.loss import cross_entropy, hierarchical_loss, softmax

from conftest import scalar_hierarchical_loss


def test_matches_scalar_recomputation(rng):
    for _ in range(10):
        hp, _, labels = toy_scene(rng, n_classes=3)
        logits = [rng.normal(size=(hp.size(i), 3)) * 3 for i in (1, 2)]
        mu = [float(rng.uniform(0, 5))]
        total, terms = hierarchical_loss(logits, hp, labels, mu)
        want = scalar_hierarchical_loss(logits, [hp.point_index(1), hp.point_index(2)], labels, mu)
        assert total == pytest.approx(want, abs=1e-10)
        assert total == pytest.approx(sum(terms)) and total >= 0


def test_hand_set_three_class_case():
    hp = hierarchy_from_indices(np.zeros((4, 3)), np.zeros(4), [[0, 0, 1, 1], [0, 0]])
    labels = np.array([0, 1, 2, -1])
    z1 = np.log(np.array([[0.5, 0.25, 0.25], [0.2, 0.2, 0.6]]))
    z2 = np.log(np.array([[0.5, 0.25, 0.25]]))
    total, terms = hierarchical_loss([z1, z2], hp, labels, [2.0])
    # superpoint 0: labels {0, 1}, tie resolved to class 0; superpoint 1: label 2 only
    l1 = 2 / 3 * -np.log(0.5) + 1 / 3 * -np.log(0.6)
    l2 = 2.0 * -(np.log(0.5) + np.log(0.25) + np.log(0.25)) / 3
    assert terms == pytest.approx([l1, l2], abs=1e-12)


def test_pure_perfect_and_mu_zero(rng):
    hp = hierarchy_from_indices(np.zeros((6, 3)), np.zeros(6), [[0, 0, 1, 1, 2, 2], [0, 0, 1]])
    labels = np.array([1, 1, 0, 0, 2, 2])
    z1 = np.full((3, 3), -np.inf)
    z1[[0, 1, 2], [1, 0, 2]] = 0.0
    total, terms = hierarchical_loss([z1, rng.normal(size=(2, 3))], hp, labels, [0.0])
    assert terms[0] == 0.0 and total == 0.0
    z = [rng.normal(size=(3, 3)), rng.normal(size=(2, 3))]
    total, terms = hierarchical_loss(z, hp, labels, [0.0])
    assert total == terms[0]


def test_unlabeled_superpoints_are_skipped(rng):
    hp = hierarchy_from_indices(np.zeros((4, 3)), np.zeros(4), [[0, 0, 1, 1]])
    z = rng.normal(size=(2, 2))
    a, _ = hierarchical_loss([z], hp, np.array([1, 0, -1, -1]), [])
    b, _ = hierarchical_loss([z[:1]], hierarchy_from_indices(np.zeros((2, 3)), np.zeros(2), [[0, 0]]),
                             np.array([1, 0]), [])
    assert a == b
    assert hierarchical_loss([z], hp, np.full(4, -1), [])[0] == 0.0
    with pytest.raises(ValueError):
        hierarchical_loss([z, z], hp, np.zeros(4), [1.0])


def test_softmax_and_clamp():
    p = softmax(np.array([[1000.0, 1000.0], [0.0, -np.inf]]))
    np.testing.assert_array_equal(p, [[0.5, 0.5], [1, 0]])
    assert cross_entropy(np.array([[0.0, 1.0]]), p[1:])[0] == pytest.approx(-np.log(1e-12))
