import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superpart.container import read_sph1, write_sph1
from superpart.errors import ParseError
from superpart.hierarchy import hierarchy_from_indices
from superpart.spgraph import build_superpoint_graph

from conftest import blob_scene


def random_hierarchy(rng, n_blobs=20):
    pos, lab = blob_scene(rng, n_blobs=n_blobs, points=(3, 20))
    pos = pos.astype(np.float32).astype(np.float64)
    coarse = rng.integers(0, max(1, n_blobs // 4), n_blobs)
    coarse[: max(1, n_blobs // 4)] = np.arange(max(1, n_blobs // 4))
    hp = hierarchy_from_indices(pos, rng.normal(size=(len(pos), 3)), [lab, coarse])
    return hp, rng.integers(-1, 5, len(pos))


def dump(*args, **kw):
    buf = io.BytesIO()
    write_sph1(buf, *args, **kw)
    return buf.getvalue()


@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_sph1_round_trip(seed, with_labels, with_graph):
    rng = np.random.default_rng(seed)
    hp, labels = random_hierarchy(rng, int(rng.integers(2, 30)))
    graphs = [build_superpoint_graph(hp, 1, eps=0.2)] if with_graph else None
    data = dump(hp, graphs, labels if with_labels else None)
    c = read_sph1(io.BytesIO(data))
    assert dump(c.hierarchy, c.graphs, c.labels) == data
    assert c.hierarchy.sizes() == hp.sizes()
    for i in (1, 2):
        assert np.array_equal(c.hierarchy.parent(i), hp.parent(i))
        assert np.array_equal(c.hierarchy.level_stats(i).point_counts, hp.level_stats(i).point_counts)
    assert np.array_equal(c.hierarchy.positions, hp.positions)
    assert (c.labels is None) != with_labels
    if with_labels:
        assert np.array_equal(c.labels, labels)
    if with_graph:
        assert np.array_equal(c.graphs[0].edges, graphs[0].edges)
        assert c.graphs[1] is None


def test_sph1_file_path(tmp_path, rng):
    hp, labels = random_hierarchy(rng)
    path = tmp_path / "h.sph1"
    n = write_sph1(path, hp, labels=labels)
    assert path.stat().st_size == n
    assert read_sph1(path).hierarchy.point_index(2).tolist() == hp.point_index(2).tolist()


def test_sph1_rejects_bad_input(rng):
    hp, labels = random_hierarchy(rng)
    data = dump(hp, labels=labels)
    with pytest.raises(ParseError):
        read_sph1(io.BytesIO(b"XXXX" + data[4:]))
    with pytest.raises(ParseError):
        read_sph1(io.BytesIO(data[:-3]))
    with pytest.raises(ParseError):
        read_sph1(io.BytesIO(data + b"\0"))
    with pytest.raises(ParseError):
        read_sph1(io.BytesIO(data[:4] + b"\x09" + data[5:]))
    with pytest.raises(ValueError):
        dump(hp, labels=labels[:-1])
    with pytest.raises(ValueError):
        dump(hp, [None, None, None])
