"""Oracle purity, confusion-based metrics and the partition/voxel purity sweep."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cloud_io import majority_label, voxel_keys
from .cut_pursuit import SolverConfig, minimize_l0
from .parallel import thread_count
from .pipeline import PipelineConfig, prepare

CSV_HEADER = ("grid_param", "component_count", "oracle_miou", "oracle_oa")


@dataclass
class ConfusionMatrix:
    """Counts with rows = ground truth, columns = prediction."""

    counts: np.ndarray
    class_names: tuple = ()

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class MetricReport:
    confusion: ConfusionMatrix
    iou: np.ndarray
    miou: float
    oa: float
    evaluated: int

    @property
    def defined(self):
        return self.evaluated > 0


def oracle_from_groups(groups, labels, n_groups):
    """Majority label per group (ties to the smallest id, -1 when unlabeled) and its point-wise copy."""
    groups = np.asarray(groups, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    sp_class = majority_label(groups, labels, n_groups)
    return sp_class, sp_class[groups]


def oracle_assign(hp, labels, level=1):
    """(per-superpoint class, per-point prediction) of the level-``level`` oracle."""
    return oracle_from_groups(hp.point_index(level), labels, hp.size(level))


def confusion_and_miou(pred, truth, n_classes=None, class_names=()):
    """Confusion matrix, per-class IoU, mIoU and overall accuracy.

    Points with truth -1 are ignored.  A prediction of -1 counts as a miss for
    the true class.  Classes absent from both truth and prediction get IoU nan
    and are left out of the mean.  Without labeled points the report has
    evaluated = 0 and nan metrics.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError("pred and truth differ in length")
    valid = truth >= 0
    if n_classes is None:
        n_classes = int(max(truth.max(initial=-1), pred.max(initial=-1))) + 1
    t = truth[valid]
    p = pred[valid]
    if np.any(t >= n_classes) or np.any(p >= n_classes):
        raise ValueError("class id out of range")
    # column n_classes collects unassigned predictions
    p = np.where(p < 0, n_classes, p)
    full = np.bincount(t * (n_classes + 1) + p, minlength=n_classes * (n_classes + 1))
    full = full.reshape(n_classes, n_classes + 1)
    counts = full[:, :n_classes]
    tp = np.diag(counts).astype(np.float64)
    fn = full.sum(axis=1) - tp
    fp = counts.sum(axis=0) - tp
    denom = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(denom > 0, tp / np.where(denom > 0, denom, 1), np.nan)
    n = int(valid.sum())
    miou = float(np.nanmean(iou)) if n and np.any(denom > 0) else float("nan")
    oa = float(tp.sum() / n) if n else float("nan")
    return MetricReport(ConfusionMatrix(counts, tuple(class_names)), iou, miou, oa, n)


@dataclass
class SweepRow:
    grid_param: float
    component_count: int
    oracle_miou: float
    oracle_oa: float


def _score(groups, n_groups, labels, n_classes):
    _, pred = oracle_from_groups(groups, labels, n_groups)
    rep = confusion_and_miou(pred, labels, n_classes)
    return rep.miou, rep.oa


def purity_sweep(cloud, grid, mode="partition", config=None):
    """Oracle purity for each grid value.

    ``partition`` mode: the grid holds regularization strengths; each value gets
    an independent level-1 partition of the (voxelized) cloud.  ``voxel`` mode:
    the grid holds cell sizes and components are the occupied cells.  Metrics
    are computed on the original points.
    """
    if cloud.labels is None:
        raise ValueError("sweep needs a labeled cloud")
    grid = [float(g) for g in grid]
    if any(not g > 0 for g in grid):
        raise ValueError("grid values must be > 0")
    labels = cloud.labels
    n_classes = int(labels.max(initial=-1)) + 1

    if mode == "voxel":
        def run(size):
            keys = voxel_keys(cloud.positions, size)
            _, groups = np.unique(keys, axis=0, return_inverse=True)
            groups = groups.reshape(-1)
            n = int(groups.max()) + 1 if len(groups) else 0
            return (n,) + _score(groups, n, labels, n_classes)
    elif mode == "partition":
        config = config or PipelineConfig()
        sub, sub_index, _, signal, graph = prepare(cloud, config)
        weight = np.bincount(sub_index, minlength=len(sub)).astype(np.float64)

        def run(lam):
            part = minimize_l0(signal, graph, SolverConfig(lam=lam, seed=config.seed), node_weight=weight)
            groups = part.super_index[sub_index]
            return (part.num_components,) + _score(groups, part.num_components, labels, n_classes)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    workers = max(1, min(thread_count(), len(grid)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, grid))
    return [SweepRow(g, int(n), float(m), float(o)) for g, (n, m, o) in zip(grid, results)]


def write_sweep_csv(rows, path_or_file):
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([f"{r.grid_param:.6f}", r.component_count, f"{r.oracle_miou:.6f}", f"{r.oracle_oa:.6f}"])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [SweepRow(float(a), int(b), float(c), float(d)) for a, b, c, d in reader]


def interpolate_curve(rows, counts):
    """Oracle mIoU of a sweep curve at the given component counts (linear in log count)."""
    pts = sorted((r.component_count, r.oracle_miou) for r in rows)
    x = np.log([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return np.interp(np.log(np.asarray(counts, dtype=np.float64)), x, y)
