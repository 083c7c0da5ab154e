"""Double-precision reference of the superpoint transformer: forward pass, attention
gradients, loss and augmentations."""
from .attention import AttentionCache, attention_backward, attention_forward
from .augment import DropoutView, sample_count, sample_superpoint_points, superpoint_dropout
from .config import KernelConfig
from .loss import hierarchical_loss
from .model import (GraphInput, decode_level, encode_level, forward_full, relative_positions,
                    transformer)
from .ops import graph_norm, linear
from .params import init_params, load_params, param_shapes, save_params

__all__ = [
    "AttentionCache", "attention_backward", "attention_forward", "DropoutView", "sample_count",
    "sample_superpoint_points", "superpoint_dropout", "KernelConfig", "hierarchical_loss", "GraphInput",
    "decode_level", "encode_level", "forward_full", "relative_positions", "transformer", "graph_norm",
    "linear", "init_params", "load_params", "param_shapes", "save_params",
]
