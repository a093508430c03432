"""Compiled vs pure-Python kernels: event throughput and cluster labelling.

    python3 benchmarks/bench_kernels.py --size 128 --t 4

Both backends run from identical states and RNG streams, so their final
configurations are also compared.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from ztising import kernels
from ztising.dynamics import Engine, SimState
from ztising.lattice import LatticeGeometry, RngSpec, init_random


def bench_dynamics(mod, engine: Engine, size: int, t_end: float, seed: int):
    spec = RngSpec(seed)
    state = SimState(init_random(LatticeGeometry(size, size), 0.5, spec), engine)
    rng = spec.generator()
    t0 = time.perf_counter()
    mod.advance(state, rng, t_end, np.iinfo(np.int64).max, False, None, None)
    dt = time.perf_counter() - t0
    return state, dt


def bench_labels(mod, state: SimState, repeat: int):
    nbr = state.geometry.neighbor_table().reshape(-1)
    t0 = time.perf_counter()
    for _ in range(repeat):
        out = mod.label_clusters(state.spins, nbr, state.geometry.width, state.geometry.height)
    return out, (time.perf_counter() - t0) / repeat


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--t", type=float, default=4.0, help="simulated time per run")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--label-repeat", type=int, default=5)
    args = ap.parse_args(argv)

    mods = kernels.backends()
    if "compiled" not in mods:
        print("compiled kernels unavailable; timing the python backend only")
    print(f"{'backend':<10} {'engine':<6} {'events':>10} {'seconds':>9} {'events/s':>12}")
    finals = {}
    for engine in Engine:
        for name, mod in mods.items():
            state, dt = bench_dynamics(mod, engine, args.size, args.t, args.seed)
            finals[(engine, name)] = state
            rate = state.n_events / dt if dt > 0 else math.inf
            print(f"{name:<10} {engine.value:<6} {state.n_events:>10} {dt:>9.3f} {rate:>12.0f}")
        if len(mods) == 2:
            a, b = finals[(engine, "python")], finals[(engine, "compiled")]
            same = np.array_equal(a.spins, b.spins) and a.n_events == b.n_events
            print(f"{'':<10} {engine.value:<6} identical trajectories: {same}")

    state = finals[(Engine.ACTIVE_SET, "python")]
    timings = {}
    for name, mod in mods.items():
        _, timings[name] = bench_labels(mod, state, args.label_repeat)
        print(f"{name:<10} labels {args.size}x{args.size}: {timings[name] * 1e3:.2f} ms")
    if len(timings) == 2 and timings["compiled"] > 0:
        print(f"labelling speedup: {timings['python'] / timings['compiled']:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
