"""Parameter bundle: deterministic initialization and the f64 blob + JSON manifest format."""
from __future__ import annotations

import json
from collections import OrderedDict

import numpy as np

from .config import ADJ_DIM, POS_DIM, KernelConfig

BLOB_DTYPE = "<f8"


def mlp_widths(config: KernelConfig):
    """Layer widths of every MLP, keyed by parameter prefix."""
    c = config
    widths = OrderedDict()
    if not c.nano_mode:
        widths["enc0.mlp"] = [c.d_hf + POS_DIM, 32, 64, c.d_point]
    for i in range(1, c.n_levels + 1):
        if i == 1:
            d_in = (c.d_hf if c.nano_mode else c.d_point) + POS_DIM
        else:
            d_in = c.d_val + POS_DIM
        widths[f"enc{i}.mlp"] = [d_in, c.d_val, c.d_val]
        widths[f"enc{i}.adj"] = [ADJ_DIM, c.d_adj, c.d_adj, c.adj_out]
    for i in range(c.n_levels - 1, 0, -1):
        widths[f"dec{i}.mlp"] = [c.d_val + c.d_val + POS_DIM, c.d_val, c.d_val]
        widths[f"dec{i}.adj"] = [ADJ_DIM, c.d_adj, c.d_adj, c.adj_out]
    return widths


def param_shapes(config: KernelConfig):
    c = config
    shapes = OrderedDict()

    def norm(prefix, d):
        shapes[f"{prefix}.norm.scale"] = (d,)
        shapes[f"{prefix}.norm.shift"] = (d,)
        shapes[f"{prefix}.norm.mean_scale"] = (d,)

    for prefix, widths in mlp_widths(c).items():
        plain_last = prefix.endswith(".adj")
        for j in range(len(widths) - 1):
            shapes[f"{prefix}.l{j}.W"] = (widths[j], widths[j + 1])
            shapes[f"{prefix}.l{j}.b"] = (widths[j + 1],)
            if not (plain_last and j == len(widths) - 2):
                norm(f"{prefix}.l{j}", widths[j + 1])
    dk = c.n_heads * c.d_key
    stages = [(f"enc{i}", c.n_blocks_enc) for i in range(1, c.n_levels + 1)]
    stages += [(f"dec{i}", c.n_blocks_dec) for i in range(c.n_levels - 1, 0, -1)]
    for stage, n_blocks in stages:
        for b in range(n_blocks):
            p = f"{stage}.block{b}"
            norm(p, c.d_val)
            for name, d in (("k", dk), ("q", dk), ("v", c.d_val)):
                shapes[f"{p}.W{name}"] = (c.d_val, d)
                shapes[f"{p}.b{name}"] = (d,)
    for i in range(1, c.n_levels + 1):
        shapes[f"cls{i}.W"] = (c.d_val, c.n_classes)
        shapes[f"cls{i}.b"] = (c.n_classes,)
    return shapes


def init_params(config: KernelConfig):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; GraphNorm at identity."""
    rng = np.random.default_rng(config.seed)
    params = OrderedDict()
    for name, shape in param_shapes(config).items():
        if name.endswith(".norm.scale") or name.endswith(".norm.mean_scale"):
            params[name] = np.ones(shape)
        elif name.endswith(".norm.shift"):
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(_fan_in(name, params, shape))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def _fan_in(name, params, shape):
    # biases share the fan-in of their weight matrix (declared just before them)
    stem, last = name.rsplit(".", 1)
    if last.startswith("b"):
        return params[f"{stem}.W{last[1:]}"].shape[0]
    return shape[0]


def save_params(params, blob_path, manifest_path):
    """Write tensors as one little-endian f64 blob and a JSON manifest of names, shapes and offsets."""
    entries = []
    offset = 0
    with open(blob_path, "wb") as fh:
        for name, arr in params.items():
            data = np.ascontiguousarray(arr, dtype=BLOB_DTYPE).tobytes()
            fh.write(data)
            entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(data)})
            offset += len(data)
    manifest = {"format": "superpart-params", "version": 1, "dtype": BLOB_DTYPE, "tensors": entries}
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_params(blob_path, manifest_path):
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    params = OrderedDict()
    for e in manifest["tensors"]:
        if e["offset"] + e["nbytes"] > len(blob):
            raise ValueError(f"tensor {e['name']} extends past the blob")
        arr = np.frombuffer(blob, dtype=manifest["dtype"], count=e["nbytes"] // 8, offset=e["offset"])
        params[e["name"]] = arr.astype(np.float64).reshape(e["shape"])
    return params
