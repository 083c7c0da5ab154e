"""Superpoint-based augmentations: subtree dropout and size-adaptive point sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def sample_count(n, n_min, n_max):
    """Points kept from a superpoint of n points: max(n_min, round(n tanh(n/n_max))), at most n."""
    if not 1 <= n_min <= n_max:
        raise ValueError("need 1 <= n_min <= n_max")
    return min(n, max(n_min, math.floor(n * math.tanh(n / n_max) + 0.5)))


def sample_superpoint_points(hp, n_min=32, n_max=128, seed=0):
    """Sampled point indices (ascending) of every level-1 superpoint, without replacement."""
    rng = np.random.default_rng(seed)
    parent = hp.parent(1)
    order = np.argsort(parent, kind="stable")
    counts = np.bincount(parent, minlength=hp.size(1))
    starts = np.concatenate([[0], np.cumsum(counts)])
    out = []
    for p in range(hp.size(1)):
        members = order[starts[p]:starts[p + 1]]
        m = sample_count(len(members), n_min, n_max)
        out.append(np.sort(rng.choice(members, size=m, replace=False)))
    return out


@dataclass
class DropoutView:
    """keep[i] masks level i (0 = points); self_drop[i] holds the raw draws of level i >= 1."""

    keep: list
    self_drop: list
    resampled: list

    def kept_index(self, i):
        return np.flatnonzero(self.keep[i])


def superpoint_dropout(hp, p_drop=0.2, seed=0):
    """Drop each superpoint of every level with probability ``p_drop``, with its subtree.

    Levels are drawn from the coarsest down; a level whose survivors would all be
    gone is redrawn (``resampled[i]`` counts redraws), so each level keeps at
    least one superpoint.
    """
    if not 0 <= p_drop < 1:
        raise ValueError("p_drop must be in [0, 1)")
    rng = np.random.default_rng(seed)
    n_levels = hp.level_count
    keep = [None] * (n_levels + 1)
    self_drop = [None] * (n_levels + 1)
    resampled = [0] * (n_levels + 1)
    for i in range(n_levels, 0, -1):
        parent_alive = np.ones(hp.size(i), dtype=bool) if i == n_levels else keep[i + 1][hp.parent(i + 1)]
        while True:
            draw = rng.random(hp.size(i)) < p_drop
            alive = parent_alive & ~draw
            if alive.any() or hp.size(i) == 0:
                break
            resampled[i] += 1
        self_drop[i] = draw
        keep[i] = alive
    keep[0] = keep[1][hp.parent(1)] if n_levels else np.ones(hp.point_count, dtype=bool)
    return DropoutView(keep, self_drop, resampled)
