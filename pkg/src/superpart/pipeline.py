"""End-to-end preprocessing: voxelize, features, hierarchical partition, superpoint graphs."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .cloud_io import voxel_subsample
from .cut_pursuit import SolverConfig
from .features import FeatureConfig, assemble_point_features, partition_signal
from .hierarchy import build_hierarchy
from .neighborhood import graph_from_knn, knn_indices
from .parallel import thread_count
from .spgraph import build_superpoint_graph


@dataclass
class PipelineConfig:
    voxel: float = 0.03
    k_feat: int = 50
    k_adj: int = 10
    mu: float = 0.0
    lambdas: tuple = (0.005, 0.05)
    use_elevation: bool = False
    weighted_fidelity: bool = True
    seed: int = 0
    graph_levels: tuple | None = None
    eps: tuple | None = None
    num_steps: int = 3
    k_interface: int = 32

    def __post_init__(self):
        if not self.voxel >= 0:
            raise ValueError("voxel must be >= 0")
        if self.k_adj > self.k_feat:
            raise ValueError("k_adj must be <= k_feat")


class StageTimer:
    """Wall-clock milliseconds per named stage."""

    def __init__(self):
        self.ms = {}

    @contextmanager
    def stage(self, name):
        t = time.perf_counter()
        yield
        self.ms[name] = self.ms.get(name, 0.0) + 1000 * (time.perf_counter() - t)


@dataclass
class PipelineResult:
    cloud: object
    sub_index: np.ndarray
    features: object
    signal: np.ndarray
    graph: object
    hierarchy: object
    graphs: list
    timings: dict = field(default_factory=dict)


def voxelize(cloud, voxel):
    if voxel > 0:
        return voxel_subsample(cloud, voxel)
    return cloud, np.arange(len(cloud))


def prepare(cloud, config, timer=None):
    """Voxelized cloud, sub_index, feature table, partition signal and k-NN graph."""
    timer = timer or StageTimer()
    with timer.stage("voxelize"):
        sub, sub_index = voxelize(cloud, config.voxel)
    with timer.stage("knn"):
        k = min(config.k_feat, len(sub) - 1)
        table = knn_indices(sub.positions, k)
    with timer.stage("features"):
        fc = FeatureConfig(k_feat=k, mu=config.mu, include_spatial=config.mu > 0)
        fc.ransac.seed = config.seed
        feats = assemble_point_features(sub, fc, neighbor_table=table)
        signal = partition_signal(feats, use_elevation=config.use_elevation)
    with timer.stage("adjacency"):
        graph = graph_from_knn(table[:, :config.k_adj])
    return sub, sub_index, feats, signal, graph


def run_pipeline(cloud, config=None, timer=None):
    config = config or PipelineConfig()
    timer = timer or StageTimer()
    sub, sub_index, feats, signal, graph = prepare(cloud, config, timer)
    with timer.stage("partition"):
        hp = build_hierarchy(signal, graph, sub.positions, list(config.lambdas),
                             SolverConfig(seed=config.seed, parallel=thread_count() > 1),
                             weighted_fidelity=config.weighted_fidelity)
    graphs = []
    levels = range(1, hp.level_count + 1) if config.graph_levels is None else config.graph_levels
    with timer.stage("graphs"):
        for j, level in enumerate(levels):
            eps = None if config.eps is None else config.eps[j]
            graphs.append(build_superpoint_graph(hp, level, eps=eps, num_steps=config.num_steps,
                                                 voxel=max(config.voxel, 1e-3), k_interface=config.k_interface))
    return PipelineResult(sub, sub_index, feats, signal, graph, hp, graphs, dict(timer.ms))
