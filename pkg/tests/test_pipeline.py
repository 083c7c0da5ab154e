import numpy as np
import pytest

from superpart.parallel import set_threads
from superpart.pipeline import PipelineConfig, StageTimer, run_pipeline
from superpart.synthetic import synthetic_room


def test_pipeline_small_room():
    cloud = synthetic_room(20000, seed=1)
    timer = StageTimer()
    res = run_pipeline(cloud, PipelineConfig(voxel=0.05, k_feat=20), timer)
    hp = res.hierarchy
    assert hp.level_count == 2 and hp.check_nesting()
    assert hp.size(0) == len(res.cloud) < len(cloud)
    assert len(res.sub_index) == len(cloud)
    assert len(res.graphs) == 2
    for g in res.graphs:
        g.validate()
    assert set(timer.ms) == {"voxelize", "knn", "features", "adjacency", "partition", "graphs"}
    assert res.timings == timer.ms


def test_pipeline_deterministic_across_threads():
    cloud = synthetic_room(15000, seed=5)
    cfg = PipelineConfig(voxel=0.05, k_feat=20)
    a = run_pipeline(cloud, cfg)
    set_threads(4)
    try:
        b = run_pipeline(cloud, cfg)
    finally:
        set_threads(None)
    for i in (1, 2):
        assert np.array_equal(a.hierarchy.parent(i), b.hierarchy.parent(i))
    for ga, gb in zip(a.graphs, b.graphs):
        assert np.array_equal(ga.edges, gb.edges)
        assert np.array_equal(ga.adjacency_features, gb.adjacency_features)


def test_config_checks():
    with pytest.raises(ValueError):
        PipelineConfig(k_feat=5, k_adj=10)
    with pytest.raises(ValueError):
        PipelineConfig(voxel=-1)
