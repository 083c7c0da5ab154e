"""Dense building blocks.

Every reduction here has a fixed order that does not depend on row positions:
matrix products accumulate over the input dimension one column at a time, and
sums over a variable set (nodes of a graph, neighbors of a node) add sorted
values.  Relabeling nodes therefore permutes outputs bit for bit.
"""
from __future__ import annotations

import numpy as np

from .config import LEAKY_SLOPE, NORM_EPS


def linear(x, w, b=None):
    """x @ w (+ b) with a row-independent accumulation order."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros((x.shape[0], w.shape[1]))
    for k in range(w.shape[0]):
        out += x[:, k:k + 1] * w[k]
    if b is not None:
        out += b
    return out


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


def sorted_sum(x, axis=0):
    """Sum along ``axis`` after sorting, so the result ignores the input order."""
    return np.sort(x, axis=axis).sum(axis=axis)


def graph_norm(x, node_to_sample=None, scale=None, shift=None, mean_scale=None, eps=NORM_EPS):
    """Per-sample, per-feature GraphNorm.

    y = scale * (x - mean_scale * mean) / std + shift, with std of the shifted
    values floored at ``eps``.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[1]
    scale = np.ones(d) if scale is None else scale
    shift = np.zeros(d) if shift is None else shift
    mean_scale = np.ones(d) if mean_scale is None else mean_scale
    if node_to_sample is None:
        groups = [np.arange(len(x))]
    else:
        node_to_sample = np.asarray(node_to_sample)
        groups = [np.flatnonzero(node_to_sample == g) for g in np.unique(node_to_sample)]
    out = np.empty_like(x)
    for idx in groups:
        if len(idx) == 0:
            continue
        xs = x[idx]
        mean = sorted_sum(xs, axis=0) / len(idx)
        centered = xs - mean_scale * mean
        var = sorted_sum(centered ** 2, axis=0) / len(idx)
        std = np.maximum(np.sqrt(var), eps)
        out[idx] = scale * centered / std + shift
    return out


def mlp(x, params, prefix, n_layers, last_plain=False, node_to_sample=None):
    """Stack of Linear -> GraphNorm -> LeakyReLU (the last layer is linear only if ``last_plain``)."""
    for j in range(n_layers):
        p = f"{prefix}.l{j}"
        x = linear(x, params[f"{p}.W"], params[f"{p}.b"])
        if last_plain and j == n_layers - 1:
            break
        x = graph_norm(x, node_to_sample, params[f"{p}.norm.scale"], params[f"{p}.norm.shift"],
                       params[f"{p}.norm.mean_scale"])
        x = leaky_relu(x)
    return x


def segment_max(values, segments, n_segments):
    """Componentwise max of rows per segment; empty segments raise."""
    counts = np.bincount(segments, minlength=n_segments)
    if np.any(counts == 0):
        raise ValueError("empty segment in max-pooling")
    out = np.full((n_segments,) + values.shape[1:], -np.inf)
    np.maximum.at(out, segments, values)
    return out


def segment_mean(values, segments, n_segments):
    """Order-independent mean of rows per segment (sorted padded sums)."""
    padded, mask = pad_segments(values, segments, n_segments)
    counts = mask.sum(axis=1)
    total = sorted_sum(padded, axis=1)
    return total / np.maximum(counts, 1).reshape((-1,) + (1,) * (values.ndim - 1))


def pad_segments(values, segments, n_segments, fill=0.0):
    """Rows grouped by segment into an (n_segments, max_size, ...) array plus a mask."""
    segments = np.asarray(segments)
    order = np.argsort(segments, kind="stable")
    counts = np.bincount(segments, minlength=n_segments)
    width = int(counts.max()) if len(counts) and counts.max() > 0 else 1
    starts = np.zeros(n_segments, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    slot = np.arange(len(segments)) - np.repeat(starts, counts)
    padded = np.full((n_segments, width) + values.shape[1:], fill, dtype=np.float64)
    mask = np.zeros((n_segments, width), dtype=bool)
    padded[segments[order], slot] = values[order]
    mask[segments[order], slot] = True
    return padded, mask
