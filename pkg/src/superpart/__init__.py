"""Hierarchical superpoint partitions of 3D point clouds, superpoint graphs with
handcrafted adjacency features, and a double-precision reference of the
superpoint transformer kernel."""

__version__ = "0.1.0"

from .cloud_io import PointCloud, read_cloud, voxel_subsample, write_cloud
from .container import read_sph1, write_sph1
from .cut_pursuit import Partition, SolverConfig, brute_force_partition, energy, minimize_l0
from .evaluation import confusion_and_miou, oracle_assign, purity_sweep
from .features import FeatureConfig, assemble_point_features, partition_signal
from .hierarchy import HierarchicalPartition, build_hierarchy, reduce_graph, tune_lambda
from .neighborhood import WeightedGraph, build_knn_graph, knn_indices
from .pipeline import PipelineConfig, run_pipeline
from .spgraph import SuperpointGraph, approximate_gap, build_superpoint_graph

__all__ = [
    "PointCloud", "read_cloud", "voxel_subsample", "write_cloud", "read_sph1", "write_sph1", "Partition",
    "SolverConfig", "brute_force_partition", "energy", "minimize_l0", "confusion_and_miou", "oracle_assign",
    "purity_sweep", "FeatureConfig", "assemble_point_features", "partition_signal", "HierarchicalPartition",
    "build_hierarchy", "reduce_graph", "tune_lambda", "WeightedGraph", "build_knn_graph", "knn_indices",
    "PipelineConfig", "run_pipeline", "SuperpointGraph", "approximate_gap", "build_superpoint_graph",
]
