"""Labeled synthetic indoor scenes for tests, sweeps and benchmarks.

A room (floor and four walls) furnished with tables, cabinets, pillars and
balls.  Points are sampled uniformly on the surfaces, so class boundaries fall on
creases and contacts between objects.  Every class has its own base color.
"""
from __future__ import annotations

import numpy as np

from .cloud_io import PointCloud

CLASS_NAMES = ("floor", "wall", "table", "cabinet", "pillar", "ball")
FLOOR, WALL, TABLE, CABINET, PILLAR, BALL = range(6)
BASE_COLORS = np.array([
    [0.55, 0.50, 0.45],
    [0.85, 0.85, 0.80],
    [0.60, 0.35, 0.15],
    [0.25, 0.30, 0.60],
    [0.70, 0.70, 0.72],
    [0.80, 0.20, 0.20],
])


def _rect(origin, u, v):
    origin, u, v = (np.asarray(a, dtype=np.float64) for a in (origin, u, v))
    return ("rect", (origin, u, v), float(np.linalg.norm(np.cross(u, v))))


def _box(lo, hi, bottom=False):
    """Faces of an axis-aligned box."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    dx, dy, dz = x1 - x0, y1 - y0, z1 - z0
    faces = [
        _rect((x0, y0, z1), (dx, 0, 0), (0, dy, 0)),
        _rect((x0, y0, z0), (dx, 0, 0), (0, 0, dz)),
        _rect((x0, y1, z0), (dx, 0, 0), (0, 0, dz)),
        _rect((x0, y0, z0), (0, dy, 0), (0, 0, dz)),
        _rect((x1, y0, z0), (0, dy, 0), (0, 0, dz)),
    ]
    if bottom:
        faces.append(_rect((x0, y0, z0), (dx, 0, 0), (0, dy, 0)))
    return faces


def _cylinder(cx, cy, r, h):
    return ("cyl", (cx, cy, r, h), 2 * np.pi * r * h)


def _sphere(center, r):
    return ("sph", (np.asarray(center, dtype=np.float64), r), 4 * np.pi * r * r)


def _sample(shape, n, rng):
    kind, args, _ = shape
    if kind == "rect":
        o, u, v = args
        a, b = rng.random((2, n))
        return o + a[:, None] * u + b[:, None] * v
    if kind == "cyl":
        cx, cy, r, h = args
        t = rng.random(n) * 2 * np.pi
        return np.stack([cx + r * np.cos(t), cy + r * np.sin(t), rng.random(n) * h], axis=1)
    c, r = args
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return c + r * d


def room_layout(rng, size=(8.0, 6.0, 3.0), cell=2.0):
    """List of (label, shapes) objects.  Furniture sits in distinct floor cells."""
    w, l, h = size
    objects = [(FLOOR, [_rect((0, 0, 0), (w, 0, 0), (0, l, 0))]),
               (WALL, [_rect((0, 0, 0), (w, 0, 0), (0, 0, h)), _rect((0, l, 0), (w, 0, 0), (0, 0, h)),
                       _rect((0, 0, 0), (0, l, 0), (0, 0, h)), _rect((w, 0, 0), (0, l, 0), (0, 0, h))])]
    nx, ny = int(w // cell), int(l // cell)
    cells = [(i, j) for i in range(nx) for j in range(ny)]
    rng.shuffle(cells)
    kinds = [TABLE, CABINET, PILLAR, BALL]
    for slot, (i, j) in enumerate(cells[: max(4, len(cells) - 2)]):
        kind = kinds[slot % len(kinds)]
        x0, y0 = i * cell + 0.3, j * cell + 0.3
        span = cell - 0.6
        if kind == TABLE:
            tw, td = rng.uniform(0.9, span, 2)
            th = rng.uniform(0.7, 0.8)
            top = _box((x0, y0, th - 0.04), (x0 + tw, y0 + td, th), bottom=True)
            legs = []
            for lx, ly in ((x0, y0), (x0 + tw - 0.06, y0), (x0, y0 + td - 0.06), (x0 + tw - 0.06, y0 + td - 0.06)):
                legs += _box((lx, ly, 0), (lx + 0.06, ly + 0.06, th - 0.04))
            objects.append((TABLE, top + legs))
        elif kind == CABINET:
            cw, cd = rng.uniform(0.5, span, 2)
            objects.append((CABINET, _box((x0, y0, 0), (x0 + cw, y0 + cd, rng.uniform(0.8, 1.8)))))
        elif kind == PILLAR:
            r = rng.uniform(0.15, 0.4)
            objects.append((PILLAR, [_cylinder(x0 + span / 2, y0 + span / 2, r, h)]))
        else:
            r = rng.uniform(0.25, 0.5)
            objects.append((BALL, [_sphere((x0 + span / 2, y0 + span / 2, r), r)]))
    return objects


def synthetic_room(n_points=100_000, seed=0, noise=0.003, color_noise=0.03, size=(8.0, 6.0, 3.0)):
    """Labeled room with about ``n_points`` points (exactly ``n_points`` when > 0)."""
    rng = np.random.default_rng(seed)
    objects = room_layout(rng, size)
    shapes = [(label, s) for label, group in objects for s in group]
    areas = np.array([s[2] for _, s in shapes])
    counts = rng.multinomial(n_points, areas / areas.sum())
    # one color per object instance
    tint = {id(group): np.clip(BASE_COLORS[label] + rng.normal(0, 0.04, 3), 0, 1) for label, group in objects}
    owner = {id(s): id(group) for _, group in objects for s in group}
    pos, col, lab = [], [], []
    for (label, s), m in zip(shapes, counts):
        if m == 0:
            continue
        pos.append(_sample(s, m, rng))
        col.append(np.repeat(tint[owner[id(s)]][None], m, axis=0))
        lab.append(np.full(m, label, dtype=np.int64))
    positions = np.concatenate(pos) + rng.normal(0, noise, (n_points, 3))
    colors = np.clip(np.concatenate(col) + rng.normal(0, color_noise, (n_points, 3)), 0, 1)
    order = rng.permutation(n_points)
    return PointCloud(positions[order], colors[order], np.concatenate(lab)[order])
