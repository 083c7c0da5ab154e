"""Point cloud containers and file I/O.

Supported inputs are PLY (``ascii 1.0`` and ``binary_little_endian 1.0``) and
whitespace-delimited XYZ text with optional RGB and label columns.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, ParseError

PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_INTEGER_MAX = {"u1": 255.0, "u2": 65535.0}

DEFAULT_MAPPING = {
    "x": "x", "y": "y", "z": "z",
    "red": "red", "green": "green", "blue": "blue",
    "intensity": "intensity",
    "label": "label",
}


@dataclass
class PointCloud:
    """Positions (N x 3, meters), radiometry (N x R in [0, 1]) and optional labels.

    ``extra`` holds additional per-point scalar fields (written as float
    properties, ignored on read unless mapped).
    """

    positions: np.ndarray
    radiometry: np.ndarray | None = None
    labels: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        if self.radiometry is None:
            self.radiometry = np.zeros((n, 0))
        radiometry = np.asarray(self.radiometry, dtype=np.float64)
        width = radiometry.shape[-1] if radiometry.ndim == 2 else (radiometry.size // n if n else 0)
        self.radiometry = radiometry.reshape(n, width)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(n)
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")

    @property
    def point_count(self):
        return len(self.positions)

    def __len__(self):
        return len(self.positions)

    def subset(self, index):
        index = np.asarray(index)
        return PointCloud(
            self.positions[index],
            self.radiometry[index],
            None if self.labels is None else self.labels[index],
            {k: np.asarray(v)[index] for k, v in self.extra.items()},
        )


# ---------------------------------------------------------------------------
# reading


def _read_header(fh):
    first = fh.readline()
    if first.strip() != b"ply":
        raise ParseError("missing 'ply' magic", line=1)
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise ParseError("unexpected end of file before end_header", line=lineno)
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if len(tokens) != 3 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unsupported format {' '.join(tokens[1:])!r}", line=lineno)
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", line=lineno)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}", line=lineno) from None
            elements.append({"name": tokens[1], "count": count, "props": []})
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            if len(tokens) == 3:
                if tokens[1] not in PLY_TYPES:
                    raise ParseError(f"unknown property type {tokens[1]!r}", line=lineno)
                elements[-1]["props"].append((tokens[2], PLY_TYPES[tokens[1]]))
            elif len(tokens) == 5 and tokens[1] == "list":
                elements[-1]["props"].append((tokens[4], "list"))
            else:
                raise ParseError("malformed property line", line=lineno)
        elif key == "end_header":
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", line=lineno)
    if fmt is None:
        raise ParseError("missing format line", line=lineno)
    return fmt, elements, lineno


def _read_ply_vertices(path):
    with open(path, "rb") as fh:
        fmt, elements, header_lines = _read_header(fh)
        vertex = next((e for e in elements if e["name"] == "vertex"), None)
        if vertex is None:
            raise ParseError("no vertex element in header", line=header_lines)
        before = elements[: elements.index(vertex)]
        if any(p[1] == "list" for p in vertex["props"]):
            raise ParseError("list properties in vertex element are not supported", line=header_lines)
        dtype = np.dtype([(name, "<" + t) for name, t in vertex["props"]])
        n = vertex["count"]
        if fmt == "binary_little_endian":
            for el in before:
                if any(p[1] == "list" for p in el["props"]):
                    raise ParseError(f"cannot skip list element {el['name']!r} before vertices")
                skip = np.dtype([(nm, "<" + t) for nm, t in el["props"]]).itemsize * el["count"]
                fh.seek(skip, os.SEEK_CUR)
            buf = fh.read(dtype.itemsize * n)
            if len(buf) != dtype.itemsize * n:
                raise ParseError("truncated binary vertex data")
            data = np.frombuffer(buf, dtype=dtype, count=n)
        else:
            lineno = header_lines
            for el in before:
                for _ in range(el["count"]):
                    fh.readline()
                    lineno += 1
            data = np.empty(n, dtype=dtype)
            names = dtype.names
            for i in range(n):
                raw = fh.readline()
                lineno += 1
                tokens = raw.split()
                if len(tokens) < len(names):
                    raise ParseError(f"expected {len(names)} values, got {len(tokens)}", line=lineno)
                try:
                    data[i] = tuple(
                        float(tok) if dtype[nm].kind == "f" else int(tok)
                        for nm, tok in zip(names, tokens)
                    )
                except ValueError as exc:
                    raise ParseError(str(exc), line=lineno) from None
    return data


def _scale_color(column):
    kind = column.dtype.str[1:]
    if kind in _INTEGER_MAX:
        return column.astype(np.float64) / _INTEGER_MAX[kind]
    return column.astype(np.float64)


def read_cloud(path, mapping=None, intensity_max=1.0):
    """Read a point cloud from ``path`` (PLY or XYZ text).

    ``mapping`` overrides the property names used for ``x``, ``y``, ``z``,
    ``red``, ``green``, ``blue``, ``intensity`` and ``label``.  Color stored as
    ``uchar``/``ushort`` is scaled by the type range; float color is taken as
    already in [0, 1]; intensity is divided by ``intensity_max``.
    """
    mapping = {**DEFAULT_MAPPING, **(mapping or {})}
    unknown = set(mapping) - set(DEFAULT_MAPPING)
    if unknown:
        raise ConfigError(f"unknown mapping keys: {sorted(unknown)}")
    with open(path, "rb") as fh:
        magic = fh.read(3)
    if magic == b"ply":
        return _cloud_from_ply(path, mapping, intensity_max)
    return _read_xyz(path)


def _cloud_from_ply(path, mapping, intensity_max):
    data = _read_ply_vertices(path)
    names = set(data.dtype.names)
    user = mapping.keys() - {k for k, v in mapping.items() if DEFAULT_MAPPING.get(k) == v}
    for key in user:
        if mapping[key] not in names:
            raise ConfigError(f"mapped property {mapping[key]!r} (for {key!r}) not in file")
    for axis in ("x", "y", "z"):
        if mapping[axis] not in names:
            raise ParseError(f"required property {mapping[axis]!r} missing")
    positions = np.stack([data[mapping[a]].astype(np.float64) for a in ("x", "y", "z")], axis=1)
    n = len(positions)
    rgb = [mapping[c] for c in ("red", "green", "blue")]
    if all(c in names for c in rgb):
        radiometry = np.stack([_scale_color(data[c]) for c in rgb], axis=1)
    elif mapping["intensity"] in names:
        radiometry = data[mapping["intensity"]].astype(np.float64)[:, None] / float(intensity_max)
    else:
        radiometry = np.zeros((n, 0))
    radiometry = np.clip(radiometry, 0.0, 1.0)
    labels = data[mapping["label"]].astype(np.int64) if mapping["label"] in names else None
    known = set(rgb) | {mapping[k] for k in ("x", "y", "z", "intensity", "label")}
    extra = {nm: data[nm].astype(np.float64) for nm in data.dtype.names if nm not in known}
    return PointCloud(positions, radiometry, labels, extra)


def _read_xyz(path):
    rows = []
    with open(path, "r") as fh:
        width = None
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if width is None:
                width = len(tokens)
                if width not in (3, 4, 6, 7):
                    raise ParseError(f"expected 3, 4, 6 or 7 columns, got {width}", line=lineno)
            elif len(tokens) != width:
                raise ParseError(f"expected {width} columns, got {len(tokens)}", line=lineno)
            try:
                rows.append([float(t) for t in tokens])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not rows:
        return PointCloud(np.zeros((0, 3)))
    arr = np.asarray(rows)
    positions = arr[:, :3]
    radiometry = None
    labels = None
    if arr.shape[1] >= 6:
        radiometry = arr[:, 3:6]
        if radiometry.max(initial=0.0) > 1.0:
            radiometry = radiometry / 255.0
        radiometry = np.clip(radiometry, 0.0, 1.0)
    if arr.shape[1] in (4, 7):
        labels = arr[:, -1].astype(np.int64)
    return PointCloud(positions, radiometry, labels)


# ---------------------------------------------------------------------------
# writing


def _vertex_layout(cloud):
    fields = [("x", "f4"), ("y", "f4"), ("z", "f4")]
    r = cloud.radiometry.shape[1]
    if r == 3:
        fields += [("red", "f4"), ("green", "f4"), ("blue", "f4")]
    elif r == 1:
        fields += [("intensity", "f4")]
    elif r != 0:
        raise ValueError(f"radiometry must have 0, 1 or 3 channels, got {r}")
    for name in cloud.extra:
        fields.append((name, "f4"))
    if cloud.labels is not None:
        fields.append(("label", "i4"))
    return fields


def write_cloud(cloud, path, format="ply_binary"):
    """Write ``cloud`` as ``ply_binary``, ``ply_ascii`` or ``xyz`` text.

    Positions, radiometry and extra fields are stored as float32, labels as int32.
    """
    if format == "xyz":
        return _write_xyz(cloud, path)
    if format not in ("ply_binary", "ply_ascii"):
        raise ValueError(f"unknown format {format!r}")
    fields = _vertex_layout(cloud)
    names = {"f4": "float", "i4": "int"}
    header = ["ply", "format " + ("ascii" if format == "ply_ascii" else "binary_little_endian") + " 1.0"]
    header.append(f"element vertex {len(cloud)}")
    header += [f"property {names[t]} {nm}" for nm, t in fields]
    header.append("end_header")
    data = np.empty(len(cloud), dtype=[(nm, "<" + t) for nm, t in fields])
    data["x"], data["y"], data["z"] = cloud.positions.T
    r = cloud.radiometry.shape[1]
    if r == 3:
        data["red"], data["green"], data["blue"] = cloud.radiometry.T
    elif r == 1:
        data["intensity"] = cloud.radiometry[:, 0]
    for name, values in cloud.extra.items():
        data[name] = values
    if cloud.labels is not None:
        data["label"] = cloud.labels
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if format == "ply_binary":
            fh.write(data.tobytes())
        else:
            # %.9g round-trips float32 exactly
            fmts = ["%.9g" if t == "f4" else "%d" for _, t in fields]
            lines = [" ".join(f % v for f, v in zip(fmts, row)) for row in data.tolist()]
            if lines:
                fh.write(("\n".join(lines) + "\n").encode("ascii"))


def _write_xyz(cloud, path):
    if cloud.radiometry.shape[1] not in (0, 3):
        raise ValueError("xyz text supports only RGB radiometry")
    cols = [cloud.positions.astype(np.float32).astype(np.float64)]
    fmt = ["%.9g"] * 3
    if cloud.radiometry.shape[1] == 3:
        # written as 0-255 so the reader's range detection is unambiguous
        cols.append(np.round(cloud.radiometry * 255.0))
        fmt += ["%d"] * 3
    if cloud.labels is not None:
        cols.append(cloud.labels[:, None].astype(np.float64))
        fmt.append("%d")
    np.savetxt(path, np.hstack(cols) if cols else np.zeros((0, 3)), fmt=fmt)


# ---------------------------------------------------------------------------
# subsampling


def majority_label(groups, labels, n_groups):
    """Most frequent non-negative label per group, ties to the smallest id; -1 if none."""
    out = np.full(n_groups, -1, dtype=np.int64)
    valid = labels >= 0
    if not valid.any():
        return out
    k = int(labels[valid].max()) + 1
    counts = np.bincount(groups[valid] * k + labels[valid], minlength=n_groups * k).reshape(n_groups, k)
    has = counts.sum(axis=1) > 0
    out[has] = counts[has].argmax(axis=1)
    return out


def label_histogram(groups, labels, n_groups, n_classes):
    valid = (labels >= 0) & (labels < n_classes)
    flat = groups[valid] * n_classes + labels[valid]
    return np.bincount(flat, minlength=n_groups * n_classes).reshape(n_groups, n_classes)


def voxel_keys(positions, voxel_size):
    return np.floor(positions / voxel_size).astype(np.int64)


def voxel_subsample(cloud, voxel_size):
    """Average points falling in the same ``voxel_size`` grid cell.

    Cells are anchored at the origin (cell index = floor(p / voxel_size)).  Returns
    the subsampled cloud, ordered by cell index, and ``sub_index`` mapping every
    original point to its output point.  Labels are aggregated by majority vote.
    """
    if not voxel_size > 0:
        raise ValueError("voxel_size must be > 0")
    n = len(cloud)
    if n == 0:
        return PointCloud(np.zeros((0, 3)), cloud.radiometry[:0],
                          None if cloud.labels is None else cloud.labels[:0]), np.zeros(0, np.int64)
    keys = voxel_keys(cloud.positions, voxel_size)
    # canonical member order so the float sums do not depend on input order
    sort_keys = [cloud.positions[:, 2], cloud.positions[:, 1], cloud.positions[:, 0]]
    sort_keys = [cloud.radiometry[:, j] for j in range(cloud.radiometry.shape[1])] + sort_keys
    if cloud.labels is not None:
        sort_keys = [cloud.labels] + sort_keys
    sort_keys += [keys[:, 2], keys[:, 1], keys[:, 0]]
    order = np.lexsort(sort_keys)
    sk = keys[order]
    new = np.ones(n, dtype=bool)
    new[1:] = np.any(sk[1:] != sk[:-1], axis=1)
    group_sorted = np.cumsum(new) - 1
    m = int(group_sorted[-1]) + 1
    sub_index = np.empty(n, dtype=np.int64)
    sub_index[order] = group_sorted
    counts = np.bincount(group_sorted, minlength=m).astype(np.float64)

    def mean(values):
        values = values[order]
        return np.stack([np.bincount(group_sorted, values[:, j], minlength=m) for j in range(values.shape[1])],
                        axis=1) / counts[:, None]

    positions = mean(cloud.positions)
    radiometry = mean(cloud.radiometry) if cloud.radiometry.shape[1] else np.zeros((m, 0))
    labels = None
    if cloud.labels is not None:
        labels = majority_label(sub_index, cloud.labels, m)
    return PointCloud(positions, radiometry, labels), sub_index


def sample_sphere(cloud, center, radius):
    """Indices (ascending) of points within ``radius`` of ``center``."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    positions = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if len(positions) == 0:
        return np.zeros(0, dtype=np.int64)
    idx = cKDTree(positions).query_ball_point(np.asarray(center, dtype=np.float64), radius, return_sorted=True)
    return np.asarray(idx, dtype=np.int64)
