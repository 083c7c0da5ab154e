from __future__ import annotations

from dataclasses import dataclass, field

LEAKY_SLOPE = 0.01
NORM_EPS = 1e-5
LOG_CLAMP = 1e-12
POS_DIM = 3
ADJ_DIM = 18


@dataclass
class KernelConfig:
    """Network sizes.  ``d_key`` is per head; ``d_val`` is split evenly across heads."""

    d_point: int = 128
    d_adj: int = 32
    d_val: int = 64
    d_key: int = 4
    n_heads: int = 16
    n_blocks_enc: int = 3
    n_blocks_dec: int = 1
    mu_weights: list = field(default_factory=lambda: [50.0])
    dropout_p: float = 0.2
    n_min: int = 32
    n_max: int = 128
    nano_mode: bool = False
    seed: int = 0
    d_hf: int = 7
    n_classes: int = 13
    n_levels: int = 2

    def __post_init__(self):
        dims = (self.d_point, self.d_adj, self.d_val, self.d_key, self.n_heads, self.d_hf,
                self.n_classes, self.n_levels)
        if min(dims) < 1 or self.n_blocks_enc < 0 or self.n_blocks_dec < 0:
            raise ValueError("dimensions must be >= 1")
        if self.d_val % self.n_heads:
            raise ValueError("d_val must be divisible by n_heads")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if len(self.mu_weights) != self.n_levels - 1:
            raise ValueError("need one mu weight per level above 1")

    @classmethod
    def nano(cls, **kw):
        base = dict(d_val=16, d_adj=16, d_key=2, nano_mode=True)
        base.update(kw)
        return cls(**base)

    @property
    def d_head(self):
        return self.d_val // self.n_heads

    @property
    def adj_out(self):
        """Width of the adjacency encoding: key and query terms for every head, plus values."""
        return 2 * self.n_heads * self.d_key + self.d_val
