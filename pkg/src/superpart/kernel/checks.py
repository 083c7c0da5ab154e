"""Self-checks of the kernel on generated toy scenes (used by ``superpart kernel-check``)."""
from __future__ import annotations

import numpy as np

from ..hierarchy import hierarchy_from_indices
from .attention import attention_backward, attention_forward
from .augment import sample_count, superpoint_dropout
from .config import KernelConfig
from .loss import hierarchical_loss, softmax
from .model import GraphInput, forward_full
from .params import init_params


def random_edges(rng, n, p=0.4, min_degree=1):
    """Oriented edges of a random sparse graph, every node with >= ``min_degree`` neighbors."""
    edges = set()
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < p:
                edges.add((a, b))
        while sum(1 for e in edges if e[0] == a) < min_degree and n > 1:
            b = int(rng.integers(n))
            if b != a:
                edges.add((a, b))
    out = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return out[rng.permutation(len(out))]


def random_attention_inputs(rng, n=6, heads=2, dk=3, dv=2, p=0.4):
    edges = random_edges(rng, n, p)
    e = len(edges)
    return dict(k=rng.normal(size=(n, heads, dk)), q=rng.normal(size=(n, heads, dk)),
                v=rng.normal(size=(n, heads, dv)), edges=edges,
                a_key=rng.normal(size=(e, heads, dk)), a_que=rng.normal(size=(e, heads, dk)),
                a_val=rng.normal(size=(e, heads, dv)))


def dense_attention(k, q, v, edges, a_key, a_que, a_val):
    """Scalar loops over nodes, heads and neighbors."""
    n, h, dk = k.shape
    out = np.zeros((n, h, v.shape[2]))
    for p in range(n):
        mine = [j for j in range(len(edges)) if edges[j][0] == p]
        if not mine:
            continue
        for hh in range(h):
            scores = []
            for j in mine:
                qn = edges[j][1]
                s = 0.0
                for d in range(dk):
                    s += (q[p, hh, d] + a_que[j, hh, d]) * (k[qn, hh, d] + a_key[j, hh, d])
                scores.append(s / np.sqrt(len(mine)))
            top = max(scores)
            ex = [np.exp(s - top) for s in scores]
            z = sum(ex)
            for j, x in zip(mine, ex):
                out[p, hh] += x / z * (v[edges[j][1], hh] + a_val[j, hh])
    return out


def gradient_check(inputs, rng, h=1e-5):
    """Max relative error between analytic and central-difference gradients."""
    names = ["k", "q", "v", "a_key", "a_que", "a_val"]
    out, cache = attention_forward(**inputs)
    g = rng.normal(size=out.shape)
    analytic = dict(zip(names, attention_backward(cache, g)))
    worst = 0.0
    for name in names:
        base = inputs[name]
        num = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            saved = base[idx]
            base[idx] = saved + h
            fp = np.sum(attention_forward(**inputs)[0] * g)
            base[idx] = saved - h
            fm = np.sum(attention_forward(**inputs)[0] * g)
            base[idx] = saved
            num[idx] = (fp - fm) / (2 * h)
        scale = max(np.abs(num).max(), np.abs(analytic[name]).max(), 1e-8)
        worst = max(worst, float(np.abs(num - analytic[name]).max() / scale))
    return worst


def toy_scene(rng, n_points=60, sizes=(10, 3), d_hf=7, n_classes=4):
    """Random points with a random 2-level hierarchy, random graphs and labels."""
    pos = rng.normal(size=(n_points, 3))
    feats = rng.normal(size=(n_points, d_hf))
    maps = []
    prev = n_points
    for s in sizes:
        si = np.concatenate([np.arange(s), rng.integers(0, s, prev - s)])
        maps.append(rng.permutation(si))
        prev = s
    hp = hierarchy_from_indices(pos, feats, maps)
    graphs = []
    for s in sizes:
        edges = random_edges(rng, s, p=0.5)
        graphs.append(GraphInput(edges, rng.normal(size=(len(edges), 18))))
    labels = rng.integers(-1, n_classes, n_points)
    return hp, graphs, labels


def relabel_scene(hp, graphs, rng):
    """Same scene with superpoint ids permuted at every level and edge lists shuffled."""
    perms = [rng.permutation(hp.size(i)) for i in range(1, hp.level_count + 1)]
    maps = []
    for i in range(1, hp.level_count + 1):
        si = perms[i - 1][hp.parent(i)]
        if i > 1:
            # rows of level i-1 are reordered by their own permutation
            reordered = np.empty_like(si)
            reordered[perms[i - 2]] = si
            si = reordered
        maps.append(si)
    hp2 = hierarchy_from_indices(hp.positions, hp.features, maps)
    graphs2 = []
    for i, g in enumerate(graphs):
        order = rng.permutation(len(g.edges))
        graphs2.append(GraphInput(perms[i][g.edges[order]], g.features[order]))
    return hp2, graphs2, perms


def run_checks(seed=0, nano=False, n_instances=10):
    """Return a list of (name, passed, detail)."""
    rng = np.random.default_rng(seed)
    results = []

    err = 0.0
    wsum = 0.0
    for _ in range(n_instances):
        inp = random_attention_inputs(rng)
        out, cache = attention_forward(**inp)
        err = max(err, float(np.abs(out - dense_attention(**inp)).max()))
        src = inp["edges"][:, 0]
        sums = np.zeros((6, 2))
        np.add.at(sums, src, cache.weights)
        wsum = max(wsum, float(np.abs(sums[np.bincount(src, minlength=6) > 0] - 1).max()))
    results.append(("attention_dense_oracle", err <= 1e-12, f"max abs diff {err:.3e}"))
    results.append(("softmax_weights_sum", wsum <= 1e-12, f"max deviation {wsum:.3e}"))

    fd = max(gradient_check(random_attention_inputs(rng, n=5), rng) for _ in range(n_instances))
    results.append(("attention_gradient", fd <= 1e-4, f"max rel error {fd:.3e}"))

    cfg_kw = dict(d_val=8, n_heads=2, d_point=16, d_adj=8, d_key=2, n_blocks_enc=2, n_classes=4, seed=seed)
    cfg = KernelConfig.nano(**cfg_kw) if nano else KernelConfig(**cfg_kw)
    params = init_params(cfg)
    hp, graphs, labels = toy_scene(rng, n_classes=cfg.n_classes)
    logits = forward_full(hp.features, hp, graphs, params, cfg)
    shapes_ok = all(z.shape == (hp.size(i + 1), cfg.n_classes) for i, z in enumerate(logits))
    results.append(("forward_shapes", shapes_ok, str([z.shape for z in logits])))

    hp2, graphs2, perms = relabel_scene(hp, graphs, rng)
    logits2 = forward_full(hp.features, hp2, graphs2, params, cfg)
    equiv = all(np.array_equal(z2[perms[i]], z) for i, (z, z2) in enumerate(zip(logits, logits2)))
    results.append(("permutation_equivariance", equiv, "bitwise"))

    total, terms = hierarchical_loss(logits, hp, labels, cfg.mu_weights)
    ok = total >= 0 and np.isclose(total, sum(terms))
    total0, terms0 = hierarchical_loss(logits, hp, labels, [0.0])
    ok &= total0 == terms0[0]
    results.append(("loss_consistency", bool(ok), f"loss {total:.6f}"))
    probs_ok = np.allclose(softmax(logits[0]).sum(axis=1), 1.0)
    results.append(("softmax_rows", bool(probs_ok), ""))

    results.append(("sample_count_128", sample_count(128, 32, 128) == 97, str(sample_count(128, 32, 128))))
    view = superpoint_dropout(hp, 0.2, seed)
    sub_ok = all(np.array_equal(view.keep[i], view.keep[i + 1][hp.parent(i + 1)] & ~view.self_drop[i])
                 for i in range(1, hp.level_count))
    results.append(("dropout_subtree", bool(sub_ok), ""))
    return results
