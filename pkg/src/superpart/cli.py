"""Command-line interface: ``superpart <command> ...``.

Options may also come from a ``--config`` file of ``key = value`` lines whose keys
mirror the long flags; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

from . import __version__
from .cloud_io import PointCloud, read_cloud, write_cloud
from .config import parse_bool, read_config
from .container import read_sph1, write_sph1
from .errors import ConfigError, ParseError, SuperpartError
from .evaluation import SweepRow, confusion_and_miou, oracle_assign, purity_sweep, write_sweep_csv
from .features import GEOMETRIC_NAMES
from .parallel import set_threads, thread_count
from .pipeline import PipelineConfig, StageTimer, prepare, run_pipeline
from .spgraph import build_superpoint_graph, default_epsilon
from .synthetic import synthetic_room


def float_list(text):
    try:
        values = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def load_input(source):
    """Read a cloud, or generate one from ``synthetic:<n>[:<seed>]``."""
    if str(source).startswith("synthetic:"):
        parts = source.split(":")
        try:
            n = int(float(parts[1]))
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError):
            raise ConfigError(f"bad synthetic input {source!r}; use synthetic:<n>[:<seed>]") from None
        return synthetic_room(n, seed)
    return read_cloud(source)


def pipeline_config(args, **kw):
    base = dict(voxel=args.voxel, seed=getattr(args, "seed", 0))
    for name in ("k_feat", "k_adj", "mu", "use_elevation", "weighted_fidelity"):
        if getattr(args, name, None) is not None:
            base[name] = getattr(args, name)
    base.update(kw)
    return PipelineConfig(**base)


# -- commands -----------------------------------------------------------------


def cmd_features(args):
    cloud = load_input(args.input)
    sub, _, feats, _, _ = prepare(cloud, pipeline_config(args))
    extra = {name: feats.geometric[:, j] for j, name in enumerate(GEOMETRIC_NAMES)}
    if feats.spatial is not None:
        extra.update({f"spatial_{a}": feats.spatial[:, j] for j, a in enumerate("xyz")})
    write_cloud(PointCloud(sub.positions, sub.radiometry, sub.labels, extra), args.out)
    print(f"{len(cloud)} points -> {len(sub)} with {feats.dim} features: {args.out}")
    return 0


def cmd_partition(args):
    cloud = load_input(args.input)
    cfg = pipeline_config(args, lambdas=tuple(args.lam), graph_levels=())
    res = run_pipeline(cloud, cfg)
    write_sph1(args.out, res.hierarchy, labels=res.cloud.labels)
    print("sizes " + " ".join(str(s) for s in res.hierarchy.sizes()) + f" -> {args.out}")
    return 0


def cmd_graph(args):
    content = read_sph1(args.partition)
    hp = content.hierarchy
    eps = args.eps if args.eps is not None else default_epsilon(args.level, args.voxel)
    g = build_superpoint_graph(hp, args.level, eps=eps, num_steps=args.steps, voxel=args.voxel,
                               k_interface=args.k_interface)
    graphs = list(content.graphs)
    graphs[args.level - 1] = g
    write_sph1(args.out, hp, graphs, content.labels)
    print(f"level {args.level}: {hp.size(args.level)} superpoints, {g.edge_count} oriented edges -> {args.out}")
    return 0


def cmd_oracle(args):
    content = read_sph1(args.partition)
    if not args.labels_from_input:
        raise ConfigError("oracle needs labels; pass --labels-from-input")
    if content.labels is None:
        raise ConfigError("the partition container stores no labels")
    hp = content.hierarchy
    if not 1 <= args.level <= hp.level_count:
        raise ConfigError(f"level must be in 1..{hp.level_count}")
    _, pred = oracle_assign(hp, content.labels, args.level)
    rep = confusion_and_miou(pred, content.labels)
    if not rep.defined:
        raise SuperpartError("no labeled points: metrics undefined")
    row = SweepRow(float(args.level), hp.size(args.level), rep.miou, rep.oa)
    if args.csv:
        write_sweep_csv([row], args.csv)
    print(f"level {args.level}: {row.component_count} superpoints, oracle mIoU {rep.miou:.6f}, OA {rep.oa:.6f}")
    return 0


def cmd_sweep(args):
    cloud = load_input(args.input)
    rows = purity_sweep(cloud, args.grid, args.mode, pipeline_config(args))
    write_sweep_csv(rows, args.csv if args.csv else sys.stdout)
    return 0


def cmd_kernel_check(args):
    from .kernel.checks import run_checks

    results = run_checks(args.seed, nano=args.nano)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_bench(args):
    cloud = load_input(args.input)
    cfg = pipeline_config(args, lambdas=tuple(args.lam))
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["run", "stage", "ms", "points", "threads"])
        for run in range(args.repeat):
            timer = StageTimer()
            t = time.perf_counter()
            run_pipeline(cloud, cfg, timer)
            total = 1000 * (time.perf_counter() - t)
            for stage, ms in timer.ms.items():
                w.writerow([run, stage, f"{ms:.1f}", len(cloud), thread_count()])
            w.writerow([run, "total", f"{total:.1f}", len(cloud), thread_count()])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_synthetic(args):
    write_cloud(synthetic_room(args.n, args.seed), args.out)
    print(f"{args.n} points -> {args.out}")
    return 0


# -- parser ---------------------------------------------------------------------


def _pipeline_flags(p, lambdas=False):
    p.add_argument("--voxel", type=float, default=0.03, help="subsampling cell (m), 0 disables")
    p.add_argument("--k", dest="k_feat", type=int, default=50, help="neighbors for point features")
    p.add_argument("--k-adj", type=int, default=10, help="neighbors of the adjacency graph")
    p.add_argument("--mu", type=float, default=0.0, help="spatial coordinate factor (1/m), 0 disables")
    p.add_argument("--use-elevation", action="store_true", help="include elevation in the partition signal")
    p.add_argument("--weighted-fidelity", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)
    if lambdas:
        p.add_argument("--lambda", dest="lam", type=float_list, default=[0.005, 0.05],
                       help="regularization per level, comma separated")


def build_parser():
    parser = argparse.ArgumentParser(prog="superpart", description="Hierarchical superpoint preprocessing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="file of 'key = value' lines")
    parser.add_argument("--threads", type=int, help="thread cap (SUPERPART_THREADS also caps)")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help=argparse.SUPPRESS)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("features", cmd_features, "compute point features, write a PLY")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    _pipeline_flags(p)

    p = add("partition", cmd_partition, "hierarchical partition, write SPH1")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, dest="sub_threads")
    _pipeline_flags(p, lambdas=True)

    p = add("graph", cmd_graph, "add the superpoint graph of one level to an SPH1 file")
    p.add_argument("--partition", required=True)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--eps", type=float, help="gap threshold (m); default 3 voxels doubled per level")
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--voxel", type=float, default=0.03)
    p.add_argument("--k-interface", type=int, default=32)
    p.add_argument("--out", required=True)

    p = add("oracle", cmd_oracle, "oracle purity of one level")
    p.add_argument("--partition", required=True)
    p.add_argument("--labels-from-input", action="store_true")
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--csv")

    p = add("sweep", cmd_sweep, "oracle purity over a lambda or voxel grid")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("partition", "voxel"), default="partition")
    p.add_argument("--grid", type=float_list, required=True)
    p.add_argument("--csv")
    _pipeline_flags(p)

    p = add("kernel-check", cmd_kernel_check, "run the network kernel self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nano", action="store_true")

    p = add("bench", cmd_bench, "time the pipeline stages, CSV in ms")
    p.add_argument("--input", required=True)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--csv")
    _pipeline_flags(p, lambdas=True)

    p = add("synthetic", cmd_synthetic, "write a labeled synthetic room")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser, subs


def _convert(action, value):
    if isinstance(action, (argparse._StoreTrueAction, argparse.BooleanOptionalAction)):
        return parse_bool(value)
    if action.type is None:
        return value
    try:
        return action.type(value)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(f"bad value for {action.dest}: {exc}") from None


def apply_config(parser, subs, values):
    """Install config-file values as defaults of every parser that knows the key."""
    used = set()
    for p in [parser] + list(subs.values()):
        defaults = {}
        for action in p._actions:
            names = {action.dest} | {s.lstrip("-").replace("-", "_") for s in action.option_strings}
            for key in names & values.keys():
                if action.dest in ("help", "version", "config", "func"):
                    continue
                defaults[action.dest] = _convert(action, values[key])
                if action.required:
                    action.required = False
                used.add(key)
        p.set_defaults(**defaults)
    unknown = sorted(values.keys() - used)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            apply_config(parser, subs, read_config(known.config))
        args = parser.parse_args(argv)
        threads = getattr(args, "sub_threads", None) or args.threads
        set_threads(threads)
        return args.func(args)
    except (ParseError, ConfigError) as exc:
        print(f"superpart: error: {exc}", file=sys.stderr)
        return 2
    except (SuperpartError, ValueError, OSError) as exc:
        print(f"superpart: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
