"""Encoder/decoder dataflow over a hierarchical partition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import attention_forward
from .config import KernelConfig
from .ops import graph_norm, linear, mlp, segment_max, segment_mean

RADIUS_FLOOR = 1e-9


def normalize_offsets(offsets, parent, n_parents):
    """Scale child offsets so each parent's children have max norm 1."""
    norms = np.linalg.norm(offsets, axis=1)
    radius = np.zeros(n_parents)
    np.maximum.at(radius, parent, norms)
    return offsets / np.maximum(radius, RADIUS_FLOOR)[parent, None]


def relative_positions(hp, scene_center=None):
    """Per-level normalized relative positions x^0 .. x^I.

    x^i of an element is its centroid minus its parent's; the coarsest level uses
    ``scene_center`` (default: mean of the points).  Offsets are scaled per parent
    to a radius of 1.
    """
    n_levels = hp.level_count
    centroids = [hp.positions] + [st.centroids for st in hp.stats]
    center = hp.positions.mean(axis=0) if scene_center is None else np.asarray(scene_center, dtype=np.float64)
    out = []
    for i in range(n_levels + 1):
        if i < n_levels:
            parent = hp.parent(i + 1)
            off = centroids[i] - centroids[i + 1][parent]
            out.append(normalize_offsets(off, parent, hp.size(i + 1)))
        else:
            off = centroids[i] - center
            out.append(normalize_offsets(off, np.zeros(len(off), dtype=np.int64), 1))
    return out


@dataclass
class GraphInput:
    """Oriented edges (receiver, neighbor) and their 18 handcrafted features for one level."""

    edges: np.ndarray
    features: np.ndarray

    @classmethod
    def from_spgraph(cls, g):
        return cls(np.asarray(g.edges, dtype=np.int64), np.asarray(g.adjacency_features, dtype=np.float64))

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2), dtype=np.int64), np.zeros((0, 18)))


def adjacency_terms(graph, params, prefix, config):
    """(A_key, A_que, A_val) per edge from the adjacency MLP."""
    c = config
    e = len(graph.edges)
    if e == 0:
        return (np.zeros((0, c.n_heads, c.d_key)),) * 2 + (np.zeros((0, c.n_heads, c.d_head)),)
    a = mlp(graph.features, params, f"{prefix}.adj", 3, last_plain=True)
    dk = c.n_heads * c.d_key
    return (a[:, :dk].reshape(e, c.n_heads, c.d_key), a[:, dk:2 * dk].reshape(e, c.n_heads, c.d_key),
            a[:, 2 * dk:].reshape(e, c.n_heads, c.d_head))


def transformer(x, graph, params, prefix, n_blocks, config, return_weights=False):
    """Blocks of GraphNorm -> K/Q/V -> attention -> residual."""
    c = config
    s = len(x)
    a_key, a_que, a_val = adjacency_terms(graph, params, prefix, c)
    all_weights = []
    for b in range(n_blocks):
        p = f"{prefix}.block{b}"
        m = graph_norm(x, None, params[f"{p}.norm.scale"], params[f"{p}.norm.shift"], params[f"{p}.norm.mean_scale"])
        k = linear(m, params[f"{p}.Wk"], params[f"{p}.bk"]).reshape(s, c.n_heads, c.d_key)
        q = linear(m, params[f"{p}.Wq"], params[f"{p}.bq"]).reshape(s, c.n_heads, c.d_key)
        v = linear(m, params[f"{p}.Wv"], params[f"{p}.bv"]).reshape(s, c.n_heads, c.d_head)
        out, cache = attention_forward(k, q, v, graph.edges, a_key, a_que, a_val)
        x = x + out.reshape(s, c.d_val)
        all_weights.append(cache.weights)
    return (x, all_weights) if return_weights else x


def encode_level(i, child_features, x_i, parent, graph, params, config):
    """g^i = T_enc(phi_enc([x^i, max over children of child_features]))."""
    n = len(x_i)
    pooled = segment_max(child_features, parent, n)
    h = mlp(np.hstack([x_i, pooled]), params, f"enc{i}.mlp", 2)
    return transformer(h, graph, params, f"enc{i}", config.n_blocks_enc, config)


def decode_level(i, g_i, h_next, x_i, parent, graph, params, config):
    """h^i = T_dec(phi_dec([x^i, g^i, h^{i+1} of the parent]))."""
    if len(g_i) != len(x_i) or len(parent) != len(x_i):
        raise ValueError("decoder inputs disagree in size")
    h = mlp(np.hstack([x_i, g_i, h_next[parent]]), params, f"dec{i}.mlp", 2)
    return transformer(h, graph, params, f"dec{i}", config.n_blocks_dec, config)


def point_embedding(point_features, x0, params):
    return mlp(np.hstack([x0, point_features]), params, "enc0.mlp", 3)


def forward_full(point_features, hp, graphs, params, config: KernelConfig, scene_center=None, point_subset=None):
    """Logits for levels 1..I (list of S_i x n_classes arrays).

    ``graphs`` holds one SuperpointGraph or GraphInput per level (None = no edges).
    ``point_subset`` restricts the points pooled into level 1 (e.g. sampled points).
    """
    if hp.level_count != config.n_levels:
        raise ValueError(f"config expects {config.n_levels} levels, hierarchy has {hp.level_count}")
    graphs = [_as_graph(g) for g in graphs]
    xs = relative_positions(hp, scene_center)
    f0 = np.asarray(point_features, dtype=np.float64)
    parent1 = hp.parent(1)
    idx = np.arange(hp.point_count) if point_subset is None else np.asarray(point_subset)
    if config.nano_mode:
        # handcrafted features averaged over each level-1 superpoint replace the point branch
        child = segment_mean(f0[idx], parent1[idx], hp.size(1))
        h = mlp(np.hstack([xs[1], child]), params, "enc1.mlp", 2)
        gs = [None, transformer(h, graphs[0], params, "enc1", config.n_blocks_enc, config)]
    else:
        g0 = point_embedding(f0[idx], xs[0][idx], params)
        gs = [g0, encode_level(1, g0, xs[1], parent1[idx], graphs[0], params, config)]
    for i in range(2, hp.level_count + 1):
        gs.append(encode_level(i, gs[i - 1], xs[i], hp.parent(i), graphs[i - 1], params, config))
    hs = [None] * (hp.level_count + 1)
    hs[-1] = gs[-1]
    for i in range(hp.level_count - 1, 0, -1):
        hs[i] = decode_level(i, gs[i], hs[i + 1], xs[i], hp.parent(i + 1), graphs[i - 1], params, config)
    return [linear(hs[i], params[f"cls{i}.W"], params[f"cls{i}.b"]) for i in range(1, hp.level_count + 1)]


def _as_graph(g):
    if g is None:
        return GraphInput.empty()
    if isinstance(g, GraphInput):
        return g
    return GraphInput.from_spgraph(g)
