"""Continuous-time engines for zero-temperature Glauber dynamics.

Two exact engines are provided:

``NAIVE_CLOCKS``
    Superposition of one rate-1 Poisson clock per site. Every ring picks a
    uniform site; the spin flips if that lowers the energy, flips on a fair
    coin if the energy is unchanged, and stays otherwise.
``ACTIVE_SET``
    Rejection-free kinetic Monte Carlo over the sites with nonzero rate,
    kept in a rate-1 bucket and a rate-1/2 bucket with swap-remove arrays.

Both engines maintain the same incremental caches (disagreement counts,
rate buckets, unsatisfied bonds and corner counts per dual vertex) so the
caches can be checked against a from-scratch rebuild at any time.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .lattice import (
    Boundary,
    LatticeGeometry,
    RngSpec,
    SpinConfig,
    disagreement_counts,
    init_random,
    magnetization,
    rate_classes,
    unsatisfied_bonds,
)


class Engine(str, enum.Enum):
    NAIVE_CLOCKS = "naive"
    ACTIVE_SET = "kmc"


class Status(enum.Enum):
    REACHED = kernels.REACHED
    MAX_EVENTS = kernels.MAX_EVENTS
    ABSORBED = kernels.ABSORBED
    WATCH = kernels.WATCH


ABSORBED = Status.ABSORBED


@dataclass(frozen=True)
class EventRecord:
    seq: int
    time: float
    site: tuple[int, int]
    dH: int
    flipped: bool
    coin: bool

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "time": self.time, "site": list(self.site), "dH": self.dH,
             "flipped": self.flipped, "coin": self.coin},
            separators=(",", ":"),
        )


@dataclass
class SiteStats:
    """Per-site flip accounting, arrays of shape ``(height, width)``."""

    flip_count: np.ndarray
    energy_lowering_flip_count: np.ndarray
    last_flip_time: np.ndarray  # NaN where the site never flipped

    @property
    def persistent(self) -> np.ndarray:
        return self.flip_count == 0

    def last_flip(self, site) -> float | None:
        x, y = site
        t = float(self.last_flip_time[y, x])
        return None if math.isnan(t) else t


def _plaquette_mask(geometry: LatticeGeometry) -> np.ndarray:
    mask = np.ones((geometry.height, geometry.width), dtype=np.uint8)
    if geometry.boundary is Boundary.FREE:
        mask[-1, :] = 0
        mask[:, -1] = 0
    return mask.reshape(-1)


def scratch_caches(config: SpinConfig) -> dict[str, np.ndarray]:
    """All incrementally maintained quantities, recomputed from the spins."""
    east, north = unsatisfied_bonds(config)
    hb = east.astype(np.uint8)
    vb = north.astype(np.uint8)
    corner = (hb + np.roll(hb, -1, axis=0)).astype(np.int8) * (vb + np.roll(vb, -1, axis=1)).astype(np.int8)
    corner = corner.reshape(-1) * _plaquette_mask(config.geometry)
    cls = rate_classes(config)
    return {
        "dis": disagreement_counts(config).reshape(-1).astype(np.int8),
        "cls": cls,
        "hb": hb.reshape(-1),
        "vb": vb.reshape(-1),
        "corner": corner.astype(np.int8),
        "n1": int((cls == 2).sum()),
        "nh": int((cls == 1).sum()),
        "unsat": int(hb.sum()) + int(vb.sum()),
        "corners": int(corner.sum()),
        "corner_vertices": int((corner > 0).sum()),
    }


class SimState:
    """Mutable simulation state owned by one thread.

    ``time`` is the current continuous time. ``next_time`` holds the already
    drawn time of the next event (NaN when none is pending), which makes a
    trajectory independent of where it is paused for observation.
    """

    def __init__(self, config: SpinConfig, engine: Engine | str = Engine.ACTIVE_SET, time: float = 0.0):
        self.geometry = config.geometry
        self.engine = Engine(engine)
        self.engine_code = kernels.NAIVE if self.engine is Engine.NAIVE_CLOCKS else kernels.KMC
        n = self.geometry.n_sites
        self.nbr = np.ascontiguousarray(self.geometry.neighbor_table().reshape(-1))
        self.deg = self.geometry.degrees()
        self.pvalid = _plaquette_mask(self.geometry)
        self.spins = config.flat.copy()
        self.flip_count = np.zeros(n, dtype=np.int64)
        self.low_count = np.zeros(n, dtype=np.int64)
        self.last_flip = np.full(n, np.nan)
        self.clock = np.array([float(time), np.nan])
        self.counters = np.zeros(7, dtype=np.int64)
        self.absorbed_time: float | None = None
        self._rebuild()

    def _rebuild(self):
        c = scratch_caches(self.config)
        self.dis = c["dis"]
        self.cls = c["cls"]
        self.hb = c["hb"].copy()
        self.vb = c["vb"].copy()
        self.corner = c["corner"].copy()
        n = self.geometry.n_sites
        self.b1 = np.zeros(n, dtype=np.int32)
        self.bh = np.zeros(n, dtype=np.int32)
        self.pos = np.zeros(n, dtype=np.int32)
        ones = np.flatnonzero(self.cls == 2).astype(np.int32)
        halves = np.flatnonzero(self.cls == 1).astype(np.int32)
        self.b1[: len(ones)] = ones
        self.bh[: len(halves)] = halves
        self.pos[ones] = np.arange(len(ones), dtype=np.int32)
        self.pos[halves] = np.arange(len(halves), dtype=np.int32)
        cnt = self.counters
        cnt[kernels.N1] = len(ones)
        cnt[kernels.NH] = len(halves)
        cnt[kernels.UNSAT] = c["unsat"]
        cnt[kernels.CORNERS] = c["corners"]
        cnt[kernels.CORNER_VERTICES] = c["corner_vertices"]
        self.clock[1] = np.nan

    # -- views -----------------------------------------------------------

    @property
    def time(self) -> float:
        return float(self.clock[0])

    @time.setter
    def time(self, value: float):
        if value < self.clock[0]:
            raise ValueError("time may not decrease")
        self.clock[0] = value

    @property
    def config(self) -> SpinConfig:
        return SpinConfig(self.geometry, self.spins.copy())

    @property
    def total_rate(self) -> float:
        return self.counters[kernels.N1] + 0.5 * self.counters[kernels.NH]

    @property
    def n_events(self) -> int:
        return int(self.counters[kernels.EVENTS])

    @property
    def n_flips(self) -> int:
        return int(self.counters[kernels.FLIPS])

    @property
    def wall_density(self) -> float:
        return int(self.counters[kernels.UNSAT]) / self.geometry.n_bonds

    @property
    def corner_vertex_count(self) -> int:
        return int(self.counters[kernels.CORNER_VERTICES])

    @property
    def magnetization(self) -> float:
        return float(self.spins.mean(dtype=np.float64))

    def buckets(self) -> tuple[np.ndarray, np.ndarray]:
        """Sites currently at rate 1 and at rate 1/2."""
        return (self.b1[: self.counters[kernels.N1]].copy(),
                self.bh[: self.counters[kernels.NH]].copy())

    def site_stats(self) -> SiteStats:
        shape = (self.geometry.height, self.geometry.width)
        return SiteStats(self.flip_count.reshape(shape).copy(),
                         self.low_count.reshape(shape).copy(),
                         self.last_flip.reshape(shape).copy())

    def cache_mismatches(self) -> list[str]:
        """Names of incremental caches that differ from a from-scratch rebuild."""
        c = scratch_caches(self.config)
        bad = []
        for name in ("dis", "cls", "hb", "vb", "corner"):
            if not np.array_equal(getattr(self, name), c[name]):
                bad.append(name)
        cnt = self.counters
        for name, slot in (("n1", kernels.N1), ("nh", kernels.NH), ("unsat", kernels.UNSAT),
                           ("corners", kernels.CORNERS), ("corner_vertices", kernels.CORNER_VERTICES)):
            if int(cnt[slot]) != c[name]:
                bad.append(name)
        ones, halves = self.buckets()
        if not np.array_equal(np.sort(ones), np.flatnonzero(c["cls"] == 2)):
            bad.append("bucket_1")
        if not np.array_equal(np.sort(halves), np.flatnonzero(c["cls"] == 1)):
            bad.append("bucket_half")
        if (len(ones) and not np.array_equal(self.pos[ones], np.arange(len(ones)))) or (
                len(halves) and not np.array_equal(self.pos[halves], np.arange(len(halves)))):
            bad.append("bucket_index")
        return bad

    def copy(self) -> "SimState":
        new = object.__new__(SimState)
        for k, v in self.__dict__.items():
            new.__dict__[k] = v.copy() if isinstance(v, np.ndarray) else v
        return new


def new_state(geometry: LatticeGeometry, rng: RngSpec, p_plus: float = 0.5,
              engine: Engine | str = Engine.ACTIVE_SET) -> SimState:
    return SimState(init_random(geometry, p_plus, rng), engine)


def _log_buffers(n: int):
    return (np.zeros(n, dtype=np.int64), np.zeros(n), np.zeros(n, dtype=np.int32),
            np.zeros(n, dtype=np.int8), np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8))


def _records(state: SimState, buf, n: int) -> list[EventRecord]:
    seq, tm, site, dh, fl, coin = buf
    return [EventRecord(int(seq[i]), float(tm[i]), state.geometry.coords(site[i]), int(dh[i]),
                        bool(fl[i]), bool(coin[i])) for i in range(n)]


def _step(state: SimState, rng: np.random.Generator) -> EventRecord | Status:
    buf = _log_buffers(1)
    n, status = kernels.advance(state, rng, math.inf, 1, False, None, buf)
    if n == 0:
        return Status(status)
    return _records(state, buf, 1)[0]


def step_naive(state: SimState, rng: np.random.Generator) -> EventRecord:
    """One clock ring. The state is updated in place; the ring is returned."""
    if state.engine is not Engine.NAIVE_CLOCKS:
        raise ValueError("step_naive needs a NAIVE_CLOCKS state")
    return _step(state, rng)


def step_kmc(state: SimState, rng: np.random.Generator) -> EventRecord | Status:
    """One rejection-free event, or ``Status.ABSORBED`` when no site can flip."""
    if state.engine is not Engine.ACTIVE_SET:
        raise ValueError("step_kmc needs an ACTIVE_SET state")
    return _step(state, rng)


Observer = Callable[[SimState], object]


@dataclass
class RunResult:
    state: SimState
    stats: SiteStats
    outputs: list[tuple[float, list]] = field(default_factory=list)
    absorbed_time: float | None = None
    n_events: int = 0


def advance_to(state: SimState, rng: np.random.Generator, t_end: float,
               watch: np.ndarray | None = None, max_events: int | None = None,
               log=None) -> tuple[int, Status]:
    """Low-level advance used by the ensemble drivers.

    On absorption the state clock jumps to ``t_end`` (the configuration can
    no longer change) and ``state.absorbed_time`` records the time of the
    last flip.
    """
    if t_end < state.time:
        raise ValueError(f"t_end={t_end} is before the current time {state.time}")
    limit = np.iinfo(np.int64).max if max_events is None else max_events
    n, status = kernels.advance(state, rng, float(t_end), limit, True, watch, log)
    status = Status(status)
    if status is Status.ABSORBED:
        if state.absorbed_time is None:
            flipped = state.last_flip[~np.isnan(state.last_flip)]
            state.absorbed_time = float(flipped.max()) if flipped.size else state.time
        state.clock[0] = max(state.clock[0], t_end)
        state.clock[1] = np.nan
    return n, status


def run_until(state: SimState, t_end: float, rng: np.random.Generator,
              observers: Iterable[Observer] = (), observe_times: Iterable[float] = (),
              event_log=None, log_flips_only: bool = True, chunk: int = 65536) -> RunResult:
    """Run the dynamics up to ``t_end``.

    ``observers`` are called at every time in ``observe_times`` (each must
    lie in ``[state.time, t_end]``); the outputs are returned in order. When
    ``event_log`` is a writable text stream every event is written to it as
    one JSON line; ``log_flips_only`` drops naive-engine rings that did not
    flip.
    """
    observers = list(observers)
    times = sorted(float(t) for t in observe_times)
    if times and (times[0] < state.time or times[-1] > t_end):
        raise ValueError("observe_times must lie within [state.time, t_end]")
    result = RunResult(state, None)
    start_events = state.n_events
    for target in times + [float(t_end)]:
        if event_log is None:
            advance_to(state, rng, target)
        else:
            buf = _log_buffers(chunk)
            while True:
                n, status = advance_to(state, rng, target, max_events=chunk, log=buf)
                for rec in _records(state, buf, n):
                    if rec.flipped or not log_flips_only:
                        event_log.write(rec.to_json() + "\n")
                if status is not Status.MAX_EVENTS:
                    break
        if len(result.outputs) < len(times):
            result.outputs.append((target, [obs(state) for obs in observers]))
    result.stats = state.site_stats()
    result.absorbed_time = state.absorbed_time
    result.n_events = state.n_events - start_events
    return result


def _center_window_constant(state: SimState, L: int) -> float:
    w, h = state.geometry.width, state.geometry.height
    cx, cy = state.geometry.origin
    s = state.spins.reshape(h, w)
    ys = np.arange(cy - L, cy + L + 1) % h
    xs = np.arange(cx - L, cx + L + 1) % w
    block = s[np.ix_(ys, xs)]
    return float(np.all(block == block[0, 0]))


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def engines_agree(geometry: LatticeGeometry, probe_times: Iterable[float], n_replicas: int,
                  master_seed: int = 0, p_plus: float = 0.5, window_L: int = 2,
                  initial: Callable[[RngSpec], SpinConfig] | None = None) -> dict:
    """Compare the two engines on independent ensembles.

    Returns ``{"engines": {name: {t: {observable: (mean, stderr)}}},
    "z": {t: {observable: z}}}`` where ``z`` is the difference of means over
    the combined standard error (0 when both are exactly equal).
    """
    probe_times = sorted(float(t) for t in probe_times)
    observables = {
        "wall_density": lambda st: st.wall_density,
        "magnetization": lambda st: st.magnetization,
        "abs_magnetization": lambda st: abs(st.magnetization),
        "window_constant": lambda st: _center_window_constant(st, window_L),
    }
    report = {"engines": {}, "z": {}}
    for offset, engine in enumerate((Engine.NAIVE_CLOCKS, Engine.ACTIVE_SET)):
        samples = {t: {k: [] for k in observables} for t in probe_times}
        for r in range(n_replicas):
            # disjoint stream ids per engine keep the two ensembles independent
            spec = RngSpec(master_seed, offset * n_replicas + r)
            config = initial(spec) if initial else init_random(geometry, p_plus, spec)
            state = SimState(config, engine)
            rng = spec.generator()
            for t in probe_times:
                advance_to(state, rng, t)
                for k, f in observables.items():
                    samples[t][k].append(f(state))
        report["engines"][engine.value] = {
            t: {k: _mean_se(v) for k, v in obs.items()} for t, obs in samples.items()}
    naive, kmc = report["engines"]["naive"], report["engines"]["kmc"]
    for t in probe_times:
        report["z"][t] = {}
        for k in observables:
            (m1, s1), (m2, s2) = naive[t][k], kmc[t][k]
            se = math.hypot(s1, s2) if not (math.isnan(s1) or math.isnan(s2)) else math.nan
            if m1 == m2:
                z = 0.0
            else:
                z = abs(m1 - m2) / se if se > 0 else math.inf
            report["z"][t][k] = z
    return report


__all__ = [
    "ABSORBED", "Engine", "EventRecord", "RunResult", "SimState", "SiteStats", "Status",
    "advance_to", "engines_agree", "magnetization", "new_state", "run_until", "scratch_caches",
    "step_kmc", "step_naive",
]
