"""Hierarchical supervision: majority label at level 1, label distributions above."""
from __future__ import annotations

import numpy as np

from ..cloud_io import label_histogram
from .config import LOG_CLAMP


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(target, probs):
    """H(y, z) = -sum_k y_k log z_k per row, log clamped at LOG_CLAMP."""
    return -np.sum(target * np.log(np.maximum(probs, LOG_CLAMP)), axis=1)


def hierarchical_loss(logits, hp, labels, mu_weights, n_classes=None):
    """(total, per-level terms).

    Level 1: sum_p (N_p / |C|) H(onehot(mode_p), softmax(z_p)).
    Level i > 1: sum_p (mu_i N_p / |C|) H(y_p, softmax(z_p)), y_p the label distribution.
    N_p and |C| count labeled points only; superpoints without labeled points are skipped.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(logits) != hp.level_count:
        raise ValueError("need logits for every level")
    if len(mu_weights) != hp.level_count - 1:
        raise ValueError("need one mu weight per level above 1")
    n_classes = logits[0].shape[1] if n_classes is None else n_classes
    total_labeled = int(np.sum(labels >= 0))
    terms = []
    for i, z in enumerate(logits, start=1):
        s = hp.size(i)
        if z.shape != (s, n_classes):
            raise ValueError(f"level {i} logits must be {s} x {n_classes}")
        hist = label_histogram(hp.point_index(i), labels, s, n_classes).astype(np.float64)
        counts = hist.sum(axis=1)
        keep = counts > 0
        if total_labeled == 0 or not keep.any():
            terms.append(0.0)
            continue
        if i == 1:
            target = np.zeros_like(hist)
            target[np.arange(s), np.argmax(hist, axis=1)] = 1.0
            coef = 1.0
        else:
            target = hist / np.where(keep, counts, 1.0)[:, None]
            coef = float(mu_weights[i - 2])
        h = cross_entropy(target[keep], softmax(z[keep]))
        terms.append(float(np.sum(coef * counts[keep] / total_labeled * h)))
    return float(sum(terms)), terms
