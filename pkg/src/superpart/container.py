"""SPH1: binary little-endian container for hierarchical partitions.

Layout::

    "SPH1"  u8 version  u8 level_count I
    per level i = 1..I:
        u64 n_prev  u64 S  u64 D
        u64[n_prev] super_index
        f32[S*3] centroids  f32[S*D] mean features  u64[S] point counts  f32[S] radii
    points:
        u64 N  f32[N*3] positions  u8 has_labels  [i64[N] labels]
    per level i = 1..I:
        u8 has_graph  [u64 E  u64[E*2] edges  f32[E*18] features  f32[E] gaps]

Writing what was read reproduces the same bytes.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .cut_pursuit import Partition
from .errors import ParseError
from .hierarchy import HierarchicalPartition, LevelStats
from .spgraph import FEATURE_DIM, SuperpointGraph

MAGIC = b"SPH1"
VERSION = 1


@dataclass
class SPH1Content:
    hierarchy: HierarchicalPartition
    graphs: list = field(default_factory=list)
    labels: np.ndarray | None = None


def _put(out, arr, dtype):
    out.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def write_sph1(path_or_file, hp, graphs=None, labels=None):
    """Serialize ``hp`` (and optional per-level SuperpointGraphs and point labels)."""
    graphs = list(graphs) if graphs is not None else []
    if len(graphs) > hp.level_count:
        raise ValueError("more graphs than levels")
    graphs += [None] * (hp.level_count - len(graphs))
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<BB", VERSION, hp.level_count))
    for i in range(1, hp.level_count + 1):
        part, st = hp.levels[i - 1], hp.stats[i - 1]
        s = part.num_components
        d = st.mean_features.shape[1]
        out.write(struct.pack("<QQQ", len(part.super_index), s, d))
        _put(out, part.super_index, "<u8")
        _put(out, st.centroids, "<f4")
        _put(out, st.mean_features, "<f4")
        _put(out, st.point_counts, "<u8")
        _put(out, st.radii, "<f4")
    out.write(struct.pack("<Q", hp.point_count))
    _put(out, hp.positions, "<f4")
    out.write(struct.pack("<B", labels is not None))
    if labels is not None:
        if len(labels) != hp.point_count:
            raise ValueError("labels do not match point count")
        _put(out, labels, "<i8")
    for g in graphs:
        out.write(struct.pack("<B", g is not None))
        if g is not None:
            out.write(struct.pack("<Q", g.edge_count))
            _put(out, g.edges, "<u8")
            _put(out, g.adjacency_features, "<f4")
            _put(out, g.gap_distance, "<f4")
    data = out.getvalue()
    if hasattr(path_or_file, "write"):
        path_or_file.write(data)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(data)
    return len(data)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ParseError(f"truncated container at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype, count, shape=None):
        dt = np.dtype(dtype)
        arr = np.frombuffer(self.take(dt.itemsize * count), dtype=dt)
        return arr.reshape(shape) if shape is not None else arr


def read_sph1(path_or_file):
    if hasattr(path_or_file, "read"):
        data = path_or_file.read()
    else:
        with open(path_or_file, "rb") as fh:
            data = fh.read()
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise ParseError("not an SPH1 container (bad magic)")
    version, n_levels = r.unpack("<BB")
    if version != VERSION:
        raise ParseError(f"unsupported SPH1 version {version}")
    levels, stats = [], []
    for _ in range(n_levels):
        n_prev, s, d = r.unpack("<QQQ")
        si = r.array("<u8", n_prev).astype(np.int64)
        centroids = r.array("<f4", s * 3, (s, 3)).astype(np.float64)
        means = r.array("<f4", s * d, (s, d)).astype(np.float64)
        counts = r.array("<u8", s).astype(np.int64)
        radii = r.array("<f4", s).astype(np.float64)
        if n_prev and (si.max() >= s):
            raise ParseError("super_index out of range")
        sizes = np.bincount(si, minlength=s)
        levels.append(Partition(si, means.copy(), sizes))
        stats.append(LevelStats(centroids, means, counts, radii))
    (n,) = r.unpack("<Q")
    positions = r.array("<f4", n * 3, (n, 3)).astype(np.float64)
    (has_labels,) = r.unpack("<B")
    labels = r.array("<i8", n).astype(np.int64) if has_labels else None
    hp = HierarchicalPartition(positions, np.zeros((n, 0)), levels, stats)
    graphs = []
    for i in range(1, n_levels + 1):
        (present,) = r.unpack("<B")
        if not present:
            graphs.append(None)
            continue
        (e,) = r.unpack("<Q")
        edges = r.array("<u8", e * 2, (e, 2)).astype(np.int64)
        feats = r.array("<f4", e * FEATURE_DIM, (e, FEATURE_DIM)).astype(np.float64)
        gaps = r.array("<f4", e).astype(np.float64)
        eps = float(gaps.max()) if e else 0.0
        graphs.append(SuperpointGraph(i, edges, feats, gaps, eps))
    if r.pos != len(data):
        raise ParseError(f"{len(data) - r.pos} trailing bytes after container")
    return SPH1Content(hp, graphs, labels)
