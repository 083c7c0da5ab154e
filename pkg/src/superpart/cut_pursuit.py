"""Piecewise-constant approximation of a graph signal with an l0 cut penalty.

Minimizes  J(e) = sum_v w_v ||e_v - f_v||^2 + lam * sum_(u,v) w_uv [e_u != e_v]
with a split/merge cut pursuit:

* every connected component of the graph starts as one component;
* SPLIT: each non-saturated component proposes a binary split.  Two candidate
  values are seeded from the farthest pair of the component, refined by 2-means,
  then alternated with a binary min-cut (unary = fidelity to each candidate,
  pairwise = lam * w_uv).  The connected pieces of the cut are kept only if the
  component's energy strictly decreases, otherwise the component is saturated;
* MERGE: adjacent components are merged (greedy matching by best energy gain,
  repeated) while a merge strictly decreases the energy;
* POLISH, once splits and merges stall: re-split the union of adjacent pairs,
  then sweep single boundary nodes into the neighboring component that lowers
  the energy most;
* stop when nothing changes or after ``max_outer_iters``.

Components of the graph are independent subproblems; the split min-cuts of
different components can run in separate threads without changing the result.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import maxflow
import numpy as np
from numba import njit

from .parallel import thread_count

_REL_TOL = 1e-12


@dataclass
class SolverConfig:
    lam: float = 1.0
    max_outer_iters: int = 10
    split_inner_iters: int = 2
    seed: int = 0
    parallel: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if self.max_outer_iters < 1 or self.split_inner_iters < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class Partition:
    super_index: np.ndarray
    component_value: np.ndarray
    component_size: np.ndarray
    energy_trace: list = field(default_factory=list)

    @property
    def num_components(self):
        return len(self.component_size)

    def members(self):
        """CSR view (order, offsets): members of component s are order[offsets[s]:offsets[s+1]]."""
        order = np.argsort(self.super_index, kind="stable")
        offsets = np.zeros(self.num_components + 1, dtype=np.int64)
        np.cumsum(self.component_size, out=offsets[1:])
        return order, offsets


@njit(cache=True)
def _first_occurrence(labels, bound):
    rank = np.full(bound, -1, dtype=np.int64)
    out = np.empty(len(labels), dtype=np.int64)
    count = 0
    for i in range(len(labels)):
        x = labels[i]
        if rank[x] < 0:
            rank[x] = count
            count += 1
        out[i] = rank[x]
    return out, count


def canonical_labels(labels):
    """Relabel to contiguous ids in order of first occurrence."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return labels.astype(np.int64), 0
    lo, hi = labels.min(), labels.max()
    if lo >= 0 and hi < 8 * len(labels) + 1024:
        out, count = _first_occurrence(labels.astype(np.int64), int(hi) + 1)
        return out, int(count)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv.reshape(-1)], len(first)


def weighted_means(f, labels, n, weights):
    wsum = np.bincount(labels, weights, minlength=n)
    sums = np.stack([np.bincount(labels, weights * f[:, j], minlength=n) for j in range(f.shape[1])], axis=1)
    return sums / np.where(wsum > 0, wsum, 1.0)[:, None], wsum


def make_partition(f, labels, node_weight=None, trace=None):
    labels, s = canonical_labels(labels)
    f = np.asarray(f, dtype=np.float64).reshape(len(labels), -1)
    w = np.ones(len(labels)) if node_weight is None else np.asarray(node_weight, dtype=np.float64)
    values, _ = weighted_means(f, labels, s, w)
    sizes = np.bincount(labels, minlength=s)
    return Partition(labels, values, sizes, list(trace or []))


def energy(signal, f, graph, lam, node_weight=None):
    """Evaluate J.  ``signal`` is an N x D array or a :class:`Partition`.

    For a Partition the cut indicator compares component ids; for an array it
    compares values.
    """
    f = np.asarray(f, dtype=np.float64)
    f = f.reshape(len(f), -1)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    if isinstance(signal, Partition):
        if len(signal.super_index) != len(f):
            raise ValueError("partition and signal sizes differ")
        e = signal.component_value[signal.super_index]
        cut = signal.super_index[u] != signal.super_index[v]
    else:
        e = np.asarray(signal, dtype=np.float64).reshape(f.shape[0], -1)
        if e.shape != f.shape:
            raise ValueError(f"shape mismatch {e.shape} vs {f.shape}")
        cut = np.any(e[u] != e[v], axis=1)
    w = np.ones(len(f)) if node_weight is None else np.asarray(node_weight, dtype=np.float64)
    fidelity = float(np.sum(w * np.sum((e - f) ** 2, axis=1)))
    return fidelity + lam * float(np.sum(graph.weights[cut]))


@njit(cache=True)
def _cc_kernel(n, u, v, mask):
    parent = np.arange(n)
    for e in range(len(u)):
        if not mask[e]:
            continue
        x, y = u[e], v[e]
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        while parent[y] != y:
            parent[y] = parent[parent[y]]
            y = parent[y]
        if x < y:
            parent[y] = x
        elif y < x:
            parent[x] = y
    # roots are the smallest member, so first occurrence order is root order
    labels = np.empty(n, dtype=np.int64)
    count = 0
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        if r == i:
            labels[i] = count
            count += 1
        else:
            labels[i] = labels[r]
    return labels


@njit(cache=True)
def _move_sweeps(f, w, indptr, nbr, nbr_w, comp, wsum, fsum, lam, max_sweeps, rel_tol):
    """Greedy single-node moves to adjacent components, nodes visited in index order.

    The energy change of moving x from A to B is exact for the current means:
    removing x from A lowers A's error by w_x W_A / (W_A - w_x) |f_x - m_A|^2,
    adding it to B raises B's by w_x W_B / (W_B + w_x) |f_x - m_B|^2, and the cut
    gains the edges from x to A and loses those from x to B.
    """
    n, d = f.shape
    moved = np.zeros(n, dtype=np.bool_)
    for _ in range(max_sweeps):
        changed = False
        for x in range(n):
            start, stop = indptr[x], indptr[x + 1]
            if stop == start:
                continue
            a = comp[x]
            cs = np.empty(stop - start, dtype=np.int64)
            ws = np.zeros(stop - start)
            m = 0
            to_a = 0.0
            for k in range(start, stop):
                c = comp[nbr[k]]
                if c == a:
                    to_a += nbr_w[k]
                    continue
                j = 0
                while j < m and cs[j] != c:
                    j += 1
                if j == m:
                    cs[m] = c
                    m += 1
                ws[j] += nbr_w[k]
            if m == 0:
                continue
            wx = w[x]
            rem = 0.0
            if wsum[a] - wx > 0:
                r2 = 0.0
                for t in range(d):
                    r2 += (f[x, t] - fsum[a, t] / wsum[a]) ** 2
                rem = -wx * wsum[a] / (wsum[a] - wx) * r2
            best = 0.0
            best_c = -1
            for j in range(m):
                b = cs[j]
                r2 = 0.0
                for t in range(d):
                    r2 += (f[x, t] - fsum[b, t] / wsum[b]) ** 2
                add = wx * wsum[b] / (wsum[b] + wx) * r2
                delta = rem + add + lam * (to_a - ws[j])
                scale = -rem + add + lam * (to_a + ws[j])
                if delta < best and delta < -rel_tol * scale:
                    best = delta
                    best_c = b
            if best_c >= 0:
                wsum[a] -= wx
                wsum[best_c] += wx
                for t in range(d):
                    fsum[a, t] -= wx * f[x, t]
                    fsum[best_c, t] += wx * f[x, t]
                comp[x] = best_c
                moved[x] = True
                changed = True
        if not changed:
            break
    return moved


def _components(n, u, v, mask=None):
    """Connected components, labeled contiguously in order of first occurrence."""
    if mask is None:
        mask = np.ones(len(u), dtype=np.bool_)
    return _cc_kernel(n, np.ascontiguousarray(u, dtype=np.int64), np.ascontiguousarray(v, dtype=np.int64),
                      np.ascontiguousarray(mask, dtype=np.bool_))


def _segment_argmax(values, groups, n_groups):
    """Per group, the smallest index attaining the maximum value (-1 for empty groups)."""
    best = np.full(n_groups, -np.inf)
    np.maximum.at(best, groups, values)
    hit = np.flatnonzero(values == best[groups])
    out = np.full(n_groups, -1, dtype=np.int64)
    g, first = np.unique(groups[hit], return_index=True)
    out[g] = hit[first]
    return out


def _binary_mincut(cost0, cost1, iu, iv, cap, batches):
    """Label 1 where the node ends on the sink side of the min-cut.

    Nodes whose unary preference exceeds the total capacity of their edges take
    that label in every minimum cut; they are fixed up front and only the rest
    goes through max-flow.
    """
    n = len(cost0)
    delta = cost1 - cost0
    capsum = np.bincount(iu, cap, minlength=n) + np.bincount(iv, cap, minlength=n)
    fixed1 = -delta > capsum
    free = delta <= capsum
    free &= ~fixed1
    labels = fixed1.copy()
    c0, c1 = cost0.copy(), cost1.copy()
    fu, fv = free[iu], free[iv]
    # edges to fixed nodes become unary terms of the free endpoint
    for a, b, keep in ((iu, iv, fu & ~fv), (iv, iu, fv & ~fu)):
        one = fixed1[b[keep]]
        c0 += np.bincount(a[keep][one], cap[keep][one], minlength=n)
        c1 += np.bincount(a[keep][~one], cap[keep][~one], minlength=n)
    both = fu & fv
    nodes = np.flatnonzero(free)
    if len(nodes) == 0:
        return labels
    local = np.full(n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    eu, ev, ecap = local[iu[both]], local[iv[both]], cap[both]
    c0, c1 = c0[nodes], c1[nodes]

    def solve(sel_nodes, sel_edges):
        remap = np.full(len(nodes), -1, dtype=np.int64)
        remap[sel_nodes] = np.arange(len(sel_nodes))
        g = maxflow.GraphFloat(len(sel_nodes), len(sel_edges))
        ids = g.add_nodes(len(sel_nodes))
        if len(sel_edges):
            g.add_edges(remap[eu[sel_edges]].astype(np.int32), remap[ev[sel_edges]].astype(np.int32),
                        ecap[sel_edges], ecap[sel_edges])
        x0, x1 = c0[sel_nodes], c1[sel_nodes]
        base = np.minimum(x0, x1)
        g.add_grid_tedges(ids, x1 - base, x0 - base)
        g.maxflow()
        return g.get_grid_segments(ids)

    if batches is None:
        labels[nodes] = solve(np.arange(len(nodes)), np.arange(len(eu)))
        return labels
    node_batch = batches[0][nodes]
    n_batches = batches[1]
    edge_batch = node_batch[eu]
    jobs = [(np.flatnonzero(node_batch == k), np.flatnonzero(edge_batch == k)) for k in range(n_batches)]
    jobs = [job for job in jobs if len(job[0])]
    with ThreadPoolExecutor(max_workers=max(1, min(thread_count(), len(jobs)))) as pool:
        results = list(pool.map(lambda job: solve(*job), jobs))
    for (sel, _), res in zip(jobs, results):
        labels[nodes[sel]] = res
    return labels


def _batches(comp_local, n_comp, weights_per_comp, n_batches):
    """Assign whole components to ``n_batches`` contiguous, size-balanced batches."""
    csum = np.cumsum(weights_per_comp)
    total = csum[-1] if len(csum) else 0
    comp_batch = np.minimum((csum - weights_per_comp) * n_batches // max(total, 1), n_batches - 1)
    return comp_batch[comp_local].astype(np.int64), n_batches


class _Solver:
    def __init__(self, f, graph, config, node_weight):
        self.f = f
        self.n = len(f)
        self.w = node_weight
        self.lam = float(config.lam)
        self.config = config
        self.u = graph.edges[:, 0]
        self.v = graph.edges[:, 1]
        self.ew = graph.weights
        self._csr = None

    def csr(self):
        """Neighbor lists (indptr, neighbors, edge weights), built on first use."""
        if self._csr is None:
            src = np.concatenate([self.u, self.v])
            dst = np.concatenate([self.v, self.u])
            wt = np.concatenate([self.ew, self.ew]).astype(np.float64)
            order = np.lexsort((dst, src))
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
            self._csr = (indptr, np.ascontiguousarray(dst[order], dtype=np.int64), np.ascontiguousarray(wt[order]))
        return self._csr

    def move_nodes(self, comp, s, saturated, max_sweeps=3):
        """Boundary-node moves; kept only when the exact energy decreases."""
        if len(self.u) == 0:
            return comp, s, saturated, False
        indptr, nbr, nbr_w = self.csr()
        wsum = np.bincount(comp, self.w, minlength=s).astype(np.float64)
        fsum = np.stack([np.bincount(comp, self.w * self.f[:, j], minlength=s) for j in range(self.f.shape[1])],
                        axis=1)
        new = comp.copy()
        moved = _move_sweeps(self.f, self.w, indptr, nbr, nbr_w, new, wsum, fsum, self.lam, max_sweeps, _REL_TOL)
        if not moved.any():
            return comp, s, saturated, False
        # a move can disconnect its source component: split it into its pieces
        pieces = _components(self.n, self.u, self.v, new[self.u] == new[self.v])
        pieces, s_new = canonical_labels(pieces)
        before = self.total_energy(comp, s)
        if not self.total_energy(pieces, s_new) < before - _REL_TOL * before:
            return comp, s, saturated, False
        touched = np.zeros(s, dtype=bool)
        touched[comp[moved]] = True
        touched[new[moved]] = True
        node_sat = saturated[comp] & ~touched[comp]
        sat = np.zeros(s_new, dtype=bool)
        sat[pieces] = node_sat
        # a piece is saturated only if all of its nodes were
        np.logical_and.at(sat, pieces, node_sat)
        return pieces, s_new, sat, True

    def fidelity_per(self, comp, s, means):
        r = np.sum((self.f - means[comp]) ** 2, axis=1) * self.w
        return np.bincount(comp, r, minlength=s)

    def total_energy(self, comp, s):
        means, _ = weighted_means(self.f, comp, s, self.w)
        fid = float(self.fidelity_per(comp, s, means).sum())
        return fid + self.lam * float(self.ew[comp[self.u] != comp[self.v]].sum())

    # -- split --------------------------------------------------------------

    def _prepare(self, act, groups, n_groups):
        """Arrays of the split sub-problem on nodes ``act`` grouped by ``groups``."""
        p = SimpleNamespace(groups=groups, n_groups=n_groups)
        p.fa, p.wa = self.f[act], self.w[act]
        p.mean, p.wsum = weighted_means(p.fa, groups, n_groups, p.wa)
        p.d = np.sum((p.fa - p.mean[groups]) ** 2, axis=1)
        p.a = _segment_argmax(p.d, groups, n_groups)
        db = np.sum((p.fa - p.fa[p.a][groups]) ** 2, axis=1)
        p.b = _segment_argmax(db, groups, n_groups)
        local = np.full(self.n, -1, dtype=np.int64)
        local[act] = np.arange(len(act))
        lu, lv = local[self.u], local[self.v]
        intra = (lu >= 0) & (lv >= 0)
        intra[intra] = groups[lu[intra]] == groups[lv[intra]]
        p.iu, p.iv = lu[intra], lv[intra]
        p.cap = self.lam * self.ew[intra]
        p.batches = None
        if self.config.parallel and thread_count() > 1 and n_groups > 1:
            sizes = np.bincount(groups, minlength=n_groups)
            p.batches = _batches(groups, n_groups, sizes, min(thread_count(), n_groups))
        return p

    def _seeds(self, p, kind):
        if kind == 0:  # farthest pair
            return p.fa[p.a], p.fa[p.b]
        x = p.a if kind == 1 else p.b
        # an extreme node against the mean of the rest of its group
        rest = p.wsum - p.wa[x]
        m = (p.mean * p.wsum[:, None] - p.fa[x] * p.wa[x, None]) / np.where(rest > 0, rest, 1.0)[:, None]
        return np.where((rest > 0)[:, None], m, p.mean), p.fa[x]

    def _best_split(self, act, groups, n_groups):
        """Best binary-cut split of each node group (nodes ``act``, group ids ``groups``).

        Three proposals per group: the farthest pair (refined by 2-means), and each
        extreme against the mean of the rest (peels off an outlying part).  The
        lowest energy wins.  Returns (piece labels over ``act``, new energy per
        group, unsplit fidelity per group, whether the group is non-constant).
        """
        p = self._prepare(act, groups, n_groups)
        fid_old = np.bincount(groups, p.wa * p.d, minlength=n_groups)
        splittable = np.zeros(n_groups, dtype=bool)
        splittable[groups] = p.d[p.a[groups]] > 0
        best_e = np.full(n_groups, np.inf)
        pieces = np.zeros(len(act), dtype=np.int64)
        for kind in range(3):
            kind_pieces, e = self._propose(p, *self._seeds(p, kind), kmeans=(kind == 0))
            better = e < best_e
            best_e[better] = e[better]
            take = better[groups]
            pieces[take] = kind_pieces[take] + kind * len(act)
        pieces, _ = canonical_labels(pieces)
        return pieces, best_e, fid_old, splittable

    @staticmethod
    def _replace(comp, s, saturated, act, pieces, accept_node, touched):
        """Give accepted nodes their piece ids; touched components become active again."""
        new_comp = comp.copy()
        new_comp[act[accept_node]] = s + pieces[accept_node]
        node_sat = saturated[comp]
        node_sat[act[accept_node]] = False
        node_sat[touched[comp]] = False
        new_comp, s_new = canonical_labels(new_comp)
        sat = np.zeros(s_new, dtype=bool)
        sat[new_comp] = node_sat
        return new_comp, s_new, sat

    def split(self, comp, s, saturated):
        act = np.flatnonzero(~saturated[comp])
        if len(act) == 0:
            return comp, s, saturated, False
        groups, n_groups = canonical_labels(comp[act])
        pieces, new_e, fid_old, splittable = self._best_split(act, groups, n_groups)
        accept = splittable & (new_e < fid_old - _REL_TOL * fid_old)
        global_of = np.empty(n_groups, dtype=np.int64)
        global_of[groups] = comp[act]
        saturated = saturated.copy()
        saturated[global_of[~accept]] = True
        if not accept.any():
            return comp, s, saturated, False
        comp, s, saturated = self._replace(comp, s, saturated, act, pieces, accept[groups], np.zeros(s, bool))
        return comp, s, saturated, True

    def resplit_pairs(self, comp, s, saturated, all_pairs=False):
        """Re-split the union of matched adjacent component pairs.

        This moves boundaries between neighbors, which neither a split of one
        component nor a merge can do.  Pairs are matched greedily in order of
        increasing merge gain.
        """
        cu, cv = comp[self.u], comp[self.v]
        cross = cu != cv
        if not cross.any():
            return comp, s, saturated, False
        a = np.minimum(cu[cross], cv[cross])
        b = np.maximum(cu[cross], cv[cross])
        key, inv = np.unique(a * s + b, return_inverse=True)
        ra, rb = key // s, key % s
        rw = np.bincount(inv, self.ew[cross], minlength=len(key))
        means, wsum = weighted_means(self.f, comp, s, self.w)
        fid = self.fidelity_per(comp, s, means)
        gain = (wsum[ra] * wsum[rb] / (wsum[ra] + wsum[rb])) * np.sum((means[ra] - means[rb]) ** 2, axis=1) \
            - self.lam * rw
        # only pairs with a component that changed since it was last examined
        order = np.lexsort((rb, ra, gain))
        if not all_pairs:
            order = order[~(saturated[ra[order]] & saturated[rb[order]])]
        if len(order) == 0:
            return comp, s, saturated, False
        used = np.zeros(s, dtype=bool)
        pair_of = np.full(s, -1, dtype=np.int64)
        base = []
        for e in order.tolist():
            x, y = ra[e], rb[e]
            if used[x] or used[y]:
                continue
            used[x] = used[y] = True
            pair_of[x] = pair_of[y] = len(base)
            base.append(fid[x] + fid[y] + self.lam * rw[e])
        base = np.asarray(base)
        act = np.flatnonzero(pair_of[comp] >= 0)
        groups = pair_of[comp[act]]
        pieces, new_e, _, _ = self._best_split(act, groups, len(base))
        accept = new_e < base - _REL_TOL * base
        if not accept.any():
            return comp, s, saturated, False
        touched = np.zeros(s, dtype=bool)
        touched[pair_of >= 0] = accept[pair_of[pair_of >= 0]]
        comp, s, saturated = self._replace(comp, s, saturated, act, pieces, accept[groups], touched)
        return comp, s, saturated, True

    def _propose(self, p, c0, c1, kmeans=True):
        """One split proposal; returns (piece labels, new energy per group)."""
        fa, wa, groups, n_groups = p.fa, p.wa, p.groups, p.n_groups
        c0, c1 = c0.copy(), c1.copy()

        def refresh(label, c0, c1):
            m1, w1 = weighted_means(fa, groups, n_groups, wa * label)
            m0, w0 = weighted_means(fa, groups, n_groups, wa * (~label))
            c0 = np.where((w0 > 0)[:, None], m0, c0)
            c1 = np.where((w1 > 0)[:, None], m1, c1)
            return c0, c1

        for _ in range(3 if kmeans else 0):  # 2-means refinement of the seeds
            label = np.sum((fa - c1[groups]) ** 2, axis=1) < np.sum((fa - c0[groups]) ** 2, axis=1)
            c0, c1 = refresh(label, c0, c1)
        for _ in range(self.config.split_inner_iters):
            cost0 = wa * np.sum((fa - c0[groups]) ** 2, axis=1)
            cost1 = wa * np.sum((fa - c1[groups]) ** 2, axis=1)
            label = _binary_mincut(cost0, cost1, p.iu, p.iv, p.cap, p.batches)
            c0, c1 = refresh(label, c0, c1)
        same = label[p.iu] == label[p.iv]
        pieces = _components(len(fa), p.iu, p.iv, same)
        pieces, n_pieces = canonical_labels(pieces)
        pmean, _ = weighted_means(fa, pieces, n_pieces, wa)
        fid_new = np.bincount(groups, wa * np.sum((fa - pmean[pieces]) ** 2, axis=1), minlength=n_groups)
        cut_new = np.bincount(groups[p.iu[~same]], p.cap[~same], minlength=n_groups)
        return pieces, fid_new + cut_new

    # -- merge --------------------------------------------------------------

    def merge(self, comp, s, saturated):
        lam = self.lam
        cu, cv = comp[self.u], comp[self.v]
        cross = cu != cv
        if not cross.any():
            return comp, s, saturated, False
        a = np.minimum(cu[cross], cv[cross])
        b = np.maximum(cu[cross], cv[cross])
        key, inv = np.unique(a * s + b, return_inverse=True)
        ra, rb = key // s, key % s
        rw = np.bincount(inv, self.ew[cross], minlength=len(key))
        means, wsum = weighted_means(self.f, comp, s, self.w)
        parent = np.arange(s)
        merged_any = False
        # rounds of greedy matchings on the reduced graph
        while len(ra):
            gain = (wsum[ra] * wsum[rb] / (wsum[ra] + wsum[rb])) * np.sum((means[ra] - means[rb]) ** 2, axis=1) \
                - lam * rw
            scale = np.maximum(lam * rw, 1e-300)
            cand = np.flatnonzero(gain < -_REL_TOL * scale)
            if len(cand) == 0:
                break
            cand = cand[np.lexsort((rb[cand], ra[cand], gain[cand]))]
            used = np.zeros(len(parent), dtype=bool)
            pairs = []
            for e in cand.tolist():
                x, y = ra[e], rb[e]
                if not used[x] and not used[y]:
                    used[x] = used[y] = True
                    pairs.append((x, y))
            merged_any = True
            px = np.array([p[0] for p in pairs])
            py = np.array([p[1] for p in pairs])
            # y joins x; reduced-graph statistics are updated in place
            nw = wsum[px] + wsum[py]
            means[px] = (means[px] * wsum[px, None] + means[py] * wsum[py, None]) / nw[:, None]
            wsum[px] = nw
            remap = np.arange(len(parent))
            remap[py] = px
            parent = remap[parent]
            ra2, rb2 = remap[ra], remap[rb]
            keep = ra2 != rb2
            a2 = np.minimum(ra2[keep], rb2[keep])
            b2 = np.maximum(ra2[keep], rb2[keep])
            key, inv = np.unique(a2 * s + b2, return_inverse=True)
            ra, rb = key // s, key % s
            rw = np.bincount(inv, rw[keep], minlength=len(key))
            saturated = saturated.copy()
            saturated[px] = False
        if not merged_any:
            return comp, s, saturated, False
        node_sat = saturated[parent][comp]
        new_comp, s_new = canonical_labels(parent[comp])
        sat = np.zeros(s_new, dtype=bool)
        sat[new_comp] = node_sat
        return new_comp, s_new, sat, True


def level_set_partition(f, graph):
    """Connected components of the graph restricted to edges joining equal values."""
    f = np.asarray(f).reshape(graph.node_count, -1)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    same = np.all(f[u] == f[v], axis=1)
    return canonical_labels(_components(graph.node_count, u, v, same))[0]


def minimize_l0(f, graph, config=None, node_weight=None):
    """Approximate minimizer of J; returns a :class:`Partition` with contiguous ids.

    ``node_weight`` scales each node's fidelity term (e.g. point counts of
    super-nodes).  The result is never worse than the one-component-per-graph-
    component solution nor than the level-set partition of ``f``.
    """
    config = config or SolverConfig()
    f = np.asarray(f, dtype=np.float64)
    f = f.reshape(len(f), -1)
    n = len(f)
    if n != graph.node_count:
        raise ValueError("signal length differs from node count")
    w = np.ones(n) if node_weight is None else np.asarray(node_weight, dtype=np.float64)
    solver = _Solver(f, graph, config, w)
    comp, s = canonical_labels(_components(n, solver.u, solver.v))
    saturated = np.zeros(s, dtype=bool)
    trace = [solver.total_energy(comp, s)]
    polish = True
    for _ in range(config.max_outer_iters):
        comp, s, saturated, split = solver.split(comp, s, saturated)
        comp, s, saturated, merged = solver.merge(comp, s, saturated)
        moved = False
        if not (split or merged):
            # polishing: move boundaries between neighbors once splits and merges stall
            comp, s, saturated, moved = solver.resplit_pairs(comp, s, saturated, polish)
            comp, s, saturated, shifted = solver.move_nodes(comp, s, saturated)
            moved = moved or shifted
            polish = False
        trace.append(solver.total_energy(comp, s))
        if trace[-1] > trace[-2] * (1 + 1e-9) + 1e-12:
            raise AssertionError(f"energy increased: {trace[-2]} -> {trace[-1]}")
        if not (split or merged or moved):
            break
    best = make_partition(f, comp, w, trace)
    level_set = level_set_partition(f, graph)
    ls = make_partition(f, level_set, w)
    if energy(ls, f, graph, config.lam, w) < energy(best, f, graph, config.lam, w):
        ls.energy_trace = trace + [energy(ls, f, graph, config.lam, w)]
        return ls
    return best


# ---------------------------------------------------------------------------
# exhaustive oracle


def _set_partitions(n):
    """Restricted growth strings of length n in lexicographic order."""
    if n == 0:
        yield ()
        return
    labels = [0] * n

    def rec(i, m):
        if i == n:
            yield tuple(labels)
            return
        for c in range(m + 1):
            labels[i] = c
            yield from rec(i + 1, max(m, c + 1))

    labels[0] = 0
    yield from rec(1, 1)


def brute_force_partition(f, graph, lam, node_weight=None, max_nodes=12):
    """Global minimizer of J by exhaustive search (tiny graphs only).

    Every edge subset induces the partition into connected components of the kept
    edges, whose energy is at most that of the subset; so searching the set
    partitions with connected blocks (block value = block mean) finds the optimum.
    Ties go to the lexicographically smallest labeling.
    """
    f = np.asarray(f, dtype=np.float64)
    n = len(f)
    f = f.reshape(n, -1)
    if n > max_nodes:
        raise ValueError(f"brute force refused for N={n} > {max_nodes}")
    w = np.ones(n) if node_weight is None else np.asarray(node_weight, dtype=np.float64)
    edges = [(int(a), int(b), float(c)) for (a, b), c in zip(graph.edges, graph.weights)]
    nbr = [0] * n
    for a, b, _ in edges:
        nbr[a] |= 1 << b
        nbr[b] |= 1 << a

    def connected(mask):
        start = mask & -mask
        seen = start
        frontier = start
        while frontier:
            bit = frontier & -frontier
            frontier ^= bit
            grow = nbr[bit.bit_length() - 1] & mask & ~seen
            seen |= grow
            frontier |= grow
        return seen == mask

    best_e, best_lab = np.inf, None
    for lab in _set_partitions(n):
        k = max(lab) + 1 if n else 0
        masks = [0] * k
        for i, c in enumerate(lab):
            masks[c] |= 1 << i
        if not all(connected(m) for m in masks):
            continue
        e = 0.0
        for c in range(k):
            idx = [i for i in range(n) if lab[i] == c]
            wt = sum(w[i] for i in idx)
            mean = sum(w[i] * f[i] for i in idx) / wt
            e += sum(w[i] * float(np.sum((f[i] - mean) ** 2)) for i in idx)
        e += lam * sum(c for a, b, c in edges if lab[a] != lab[b])
        if e < best_e:
            best_e, best_lab = e, lab
    part = make_partition(f, np.asarray(best_lab, dtype=np.int64), w)
    part.energy_trace = [best_e]
    return part


def check_connected_components(partition, graph):
    """True when every component induces a connected subgraph."""
    s = partition.num_components
    si = partition.super_index
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    inner = si[u] == si[v]
    labels = _components(graph.node_count, u, v, inner)
    # a component is connected iff all its nodes share one sub-label
    pairs = np.unique(np.stack([si, labels], axis=1), axis=0)
    return len(pairs) == s


__all__ = [
    "SolverConfig", "Partition", "energy", "minimize_l0", "brute_force_partition",
    "canonical_labels", "make_partition", "level_set_partition", "check_connected_components",
]
