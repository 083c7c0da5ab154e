"""Superpoint attention with per-edge adjacency terms, and its analytic gradient.

For a receiving node p with neighbors q (edges e = (p, q)) and head h:

    score_e = sum_d (Q_p + Aq_e)_d (K_q + Ak_e)_d / sqrt(|N(p)|)
    w_e     = softmax of score over the edges of p
    out_p   = sum_e w_e (V_q + Av_e)

Shapes: K, Q are S x H x Dk; V is S x H x Dv; Ak, Aq are E x H x Dk; Av is
E x H x Dv.  Neighbor sums are taken over sorted padded rows, so the result does
not depend on how the edges are listed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import pad_segments


@dataclass
class AttentionCache:
    edges: np.ndarray
    n_nodes: int
    degree: np.ndarray
    qa: np.ndarray
    ka: np.ndarray
    va: np.ndarray
    weights: np.ndarray


def _check(k, q, v, edges, a_key, a_que, a_val):
    if k.ndim != 3 or q.shape != k.shape or v.ndim != 3 or v.shape[:2] != k.shape[:2]:
        raise ValueError("K, Q must be S x H x Dk and V S x H x Dv")
    e = len(edges)
    if a_key.shape != (e,) + k.shape[1:] or a_que.shape != a_key.shape or a_val.shape != (e,) + v.shape[1:]:
        raise ValueError("adjacency terms must be E x H x D")


def attention_forward(k, q, v, edges, a_key=None, a_que=None, a_val=None, strict=False):
    """Returns (out S x H x Dv, cache).  Nodes without neighbors get zeros
    (or raise with ``strict``)."""
    k, q, v = (np.asarray(t, dtype=np.float64) for t in (k, q, v))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n, h, dk = k.shape
    e = len(edges)
    a_key = np.zeros((e, h, dk)) if a_key is None else np.asarray(a_key, dtype=np.float64)
    a_que = np.zeros((e, h, dk)) if a_que is None else np.asarray(a_que, dtype=np.float64)
    a_val = np.zeros((e, h, v.shape[2])) if a_val is None else np.asarray(a_val, dtype=np.float64)
    _check(k, q, v, edges, a_key, a_que, a_val)
    src, dst = edges[:, 0], edges[:, 1]
    degree = np.bincount(src, minlength=n)
    if strict and np.any(degree == 0):
        raise ValueError("node without neighbors")
    qa = q[src] + a_que
    ka = k[dst] + a_key
    va = v[dst] + a_val
    scores = np.sum(qa * ka, axis=2) / np.sqrt(np.maximum(degree[src], 1))[:, None]
    weights = segment_softmax(scores, src, n)
    out = neighbor_sum(weights[:, :, None] * va, src, n)
    return out, AttentionCache(edges, n, degree, qa, ka, va, weights)


def segment_softmax(scores, src, n):
    """Softmax of E x H scores over the edges sharing a source node."""
    padded, mask = pad_segments(scores, src, n, fill=-np.inf)
    top = padded.max(axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    ex = np.exp(scores - top[src])
    denom = neighbor_sum(ex, src, n)
    return ex / denom[src]


def neighbor_sum(values, src, n):
    """Sum of edge values per source node, order-independent."""
    padded, _ = pad_segments(values, src, n)
    return np.sort(padded, axis=1).sum(axis=1)


def attention_backward(cache, grad_out):
    """Gradients (dK, dQ, dV, dA_key, dA_que, dA_val) of sum(out * grad_out)."""
    c = cache
    g = np.asarray(grad_out, dtype=np.float64)
    src, dst = c.edges[:, 0], c.edges[:, 1]
    n = c.n_nodes
    w = c.weights
    g_e = g[src]
    d_va = w[:, :, None] * g_e
    d_w = np.sum(g_e * c.va, axis=2)
    expected = np.zeros((n,) + w.shape[1:])
    np.add.at(expected, src, w * d_w)
    d_score = w * (d_w - expected[src])
    inv = 1.0 / np.sqrt(np.maximum(c.degree[src], 1))[:, None, None]
    d_qa = d_score[:, :, None] * c.ka * inv
    d_ka = d_score[:, :, None] * c.qa * inv
    d_q = np.zeros((n,) + c.qa.shape[1:])
    d_k = np.zeros_like(d_q)
    d_v = np.zeros((n,) + c.va.shape[1:])
    np.add.at(d_q, src, d_qa)
    np.add.at(d_k, dst, d_ka)
    np.add.at(d_v, dst, d_va)
    return d_k, d_q, d_v, d_ka, d_qa, d_va
