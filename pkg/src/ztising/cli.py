"""Command line interface: ``run``, ``sweep``, ``analyze`` and ``classify``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .clusters import snapshot_summary
from .contours import Window, window_report
from .dynamics import Engine, SimState, advance_to, run_until
from .experiments import DEFAULT_PROBE_TIMES, ExperimentConfig, parse_config, parse_list, parse_size, run_ensemble
from .kernels import BACKEND
from .lattice import Boundary, ConfigError, LatticeGeometry, RngSpec, init_random
from .snapshot import Snapshot, iter_snapshots, read_snapshot, snapshot_name, write_snapshot
from .windows import EVENTS, classify_window, grid_event_means


def _geometry(args) -> LatticeGeometry:
    w, h = parse_size(args.size)
    return LatticeGeometry(w, h, Boundary(args.boundary))


def _add_common(p: argparse.ArgumentParser, defaults: bool = True):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--seed", type=int, default=d(0), help="master seed")
    p.add_argument("--engine", choices=[e.value for e in Engine], default=d("kmc"))
    p.add_argument("--size", default=d("64"), help="N or WxH")
    p.add_argument("--boundary", choices=[b.value for b in Boundary], default=d("torus"))
    p.add_argument("--t-grid", default=d(",".join(f"{t:g}" for t in DEFAULT_PROBE_TIMES)),
                   help="comma separated probe times")
    p.add_argument("--p-plus", type=float, default=d(0.5))


def cmd_run(args) -> int:
    g = _geometry(args)
    spec = RngSpec(args.seed, args.stream)
    state = SimState(init_random(g, args.p_plus, spec), Engine(args.engine))
    rng = spec.generator()
    times = parse_list(args.t_grid, float)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["t", "events", "wall_density", "magnetization", "corner_density", "persistence",
                     "absorbed"])
    log = open(args.event_log, "w") if args.event_log else None
    try:
        last = 0.0
        for t in times:
            if log is not None:
                run_until(state, t, rng, event_log=log, log_flips_only=not args.log_rings)
            else:
                advance_to(state, rng, t)
            last = t
            writer.writerow([repr(t), state.n_events, repr(state.wall_density), repr(state.magnetization),
                             repr(state.corner_vertex_count / int(state.pvalid.sum())),
                             repr(float((state.flip_count == 0).mean())), int(state.absorbed_time is not None)])
            if out is not None:
                write_snapshot(out / snapshot_name(args.stream, t), Snapshot(state.config, t, args.seed, args.stream))
    finally:
        if log is not None:
            log.close()
    if state.absorbed_time is not None:
        print(f"# absorbed at t={state.absorbed_time!r} (horizon {last!r})", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    values = parse_config(Path(args.config).read_text()) if args.config else {}
    flags = {
        "master_seed": args.seed,
        "engine": args.engine and Engine(args.engine),
        "probe_times": args.t_grid and parse_list(args.t_grid, float),
        "n_replicas": args.replicas,
        "L_values": args.L and parse_list(args.L, int),
        "workers": args.workers,
        "replica_offset": args.replica_offset,
        "output_dir": args.out and Path(args.out),
        "p_plus": args.p_plus,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.size is not None or args.boundary is not None or "geometry" not in values:
        g = values.get("geometry", LatticeGeometry(64, 64))
        w, h = parse_size(args.size) if args.size else (g.width, g.height)
        values["geometry"] = LatticeGeometry(w, h, Boundary(args.boundary) if args.boundary else g.boundary)
    cfg = ExperimentConfig(**values)
    if cfg.output_dir is None:
        raise ConfigError("sweep needs an output directory (config key 'output' or --out)")
    result = run_ensemble(cfg)
    print(f"wrote {len(result.files)} files to {cfg.output_dir} "
          f"({cfg.n_replicas} replicas, backend {BACKEND})", file=sys.stderr)
    return 0


def _snapshot_paths(paths):
    for p in paths:
        p = Path(p)
        if p.is_dir():
            yield from iter_snapshots(p)
        else:
            yield p, read_snapshot(p)


def cmd_analyze(args) -> int:
    L_values = parse_list(args.L, int) if args.L else ()
    header = ["file", "stream_id", "time", "n_clusters", "max_cluster", "origin_cluster",
              "r_star_min", "r_star_max", "wraps"]
    for L in L_values:
        header += [f"P({ev})@L{L}" for ev in EVENTS]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for path, snap in _snapshot_paths(args.snapshots):
            site = tuple(parse_list(args.site, int)) if args.site else None
            s = snapshot_summary(snap.config, site)
            row = [path.name, snap.stream_id, repr(snap.time), s["n_clusters"], s["max_cluster"],
                   s["origin_cluster"], "" if s["r_star_min"] is None else repr(s["r_star_min"]),
                   "" if s["r_star_max"] is None else repr(s["r_star_max"]), int(s["wraps"])]
            for L in L_values:
                means = grid_event_means(snap.config, L)
                row += [repr(means[ev]) for ev in EVENTS]
            w.writerow(row)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_classify(args) -> int:
    snap = read_snapshot(args.snapshot)
    g = snap.config.geometry
    center = tuple(parse_list(args.center, int)) if args.center else g.origin
    window = Window(center, args.L).validate(g)
    report = window_report(snap.config, window)
    report["window_class"] = classify_window(snap.config, window).kind.value
    print(json.dumps(report, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ztising", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one trajectory and write snapshots")
    _add_common(p)
    p.add_argument("--stream", type=int, default=0, help="replica / stream id")
    p.add_argument("--out", help="directory for ZTIS1 snapshots at the probe times")
    p.add_argument("--event-log", help="write events as JSON lines to this file")
    p.add_argument("--log-rings", action="store_true",
                   help="also log naive-engine rings that did not flip")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run an ensemble described by a config file")
    p.add_argument("config", nargs="?", help="key = value config file")
    _add_common(p, defaults=False)
    p.add_argument("--replicas", type=int)
    p.add_argument("--replica-offset", type=int)
    p.add_argument("--L", help="comma separated window half-widths")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="cluster (and window) observables from snapshots")
    p.add_argument("snapshots", nargs="+", help="snapshot files or directories")
    p.add_argument("--site", help="x,y of the reference site (default: lattice centre)")
    p.add_argument("--L", help="also report grid window events for these half-widths")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify", help="classify one window of a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--center", help="x,y (default: lattice centre)")
    p.add_argument("--L", type=int, required=True)
    p.set_defaults(func=cmd_classify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"ztising: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
