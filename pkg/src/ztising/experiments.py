"""Ensemble experiments: replica fan-out, estimators, fits and recurrence logs.

Every replica ``r`` is driven by its own stream ``RngSpec(master_seed, r)``,
so results depend only on the configuration and on which replica indices
are run. Replica-level values are kept (and written to ``replicas.csv``) so
that estimates from several partial runs can be pooled exactly.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clusters import snapshot_summary
from .contours import Window
from .dynamics import Engine, SimState, SiteStats, Status, advance_to
from .lattice import Boundary, ConfigError, LatticeGeometry, RngSpec, init_random
from .snapshot import Snapshot, snapshot_name, to_bytes
from .windows import EVENTS, WindowClass, classify_window, grid_class_counts, grid_event_means

OBSERVABLES = frozenset({
    "wall_density", "magnetization", "corners", "persistence", "windows", "clusters",
    "window_classes", "recurrence", "snapshots",
})
DEFAULT_OBSERVABLES = frozenset({
    "wall_density", "magnetization", "corners", "persistence", "windows", "clusters",
})
DEFAULT_PROBE_TIMES = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


class FiniteSizeWarning(UserWarning):
    """Probe times beyond the range where a finite torus mimics the infinite lattice."""


class InsufficientSpanError(ValueError):
    """A power-law fit was asked for on too few or too closely spaced times."""


class ExperimentIOError(OSError):
    """Writing outputs failed; ``manifest`` lists what was written."""

    def __init__(self, message: str, manifest: dict):
        super().__init__(message)
        self.manifest = manifest


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an ensemble run.

    ``replica_offset`` shifts the replica (stream) indices, so two runs with
    offsets 0 and 50 and 50 replicas each cover streams 0..99.
    """

    geometry: LatticeGeometry
    p_plus: float = 0.5
    engine: Engine = Engine.ACTIVE_SET
    probe_times: tuple[float, ...] = DEFAULT_PROBE_TIMES
    n_replicas: int = 1
    L_values: tuple[int, ...] = (2,)
    master_seed: int = 0
    observables: frozenset = DEFAULT_OBSERVABLES
    output_dir: Path | None = None
    replica_offset: int = 0
    workers: int = 1
    recurrence_L: int = 2

    def __post_init__(self):
        object.__setattr__(self, "engine", Engine(self.engine))
        times = tuple(float(t) for t in self.probe_times)
        object.__setattr__(self, "probe_times", times)
        object.__setattr__(self, "L_values", tuple(int(v) for v in self.L_values))
        object.__setattr__(self, "observables", frozenset(self.observables))
        if self.output_dir is not None:
            object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not times:
            raise ConfigError("at least one probe time is required")
        if times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"probe times must be nonnegative and strictly increasing: {times}")
        if self.n_replicas < 1:
            raise ConfigError("n_replicas must be at least 1")
        if self.replica_offset < 0:
            raise ConfigError("replica_offset must be nonnegative")
        if not 0.0 <= self.p_plus <= 1.0:
            raise ConfigError(f"p_plus={self.p_plus} is not a probability")
        unknown = self.observables - OBSERVABLES
        if unknown:
            raise ConfigError(f"unknown observables: {sorted(unknown)}")
        for L in self.L_values + ((self.recurrence_L,) if "recurrence" in self.observables else ()):
            Window(self.geometry.origin, L).validate(self.geometry)
        limit = (min(self.geometry.width, self.geometry.height) / 8) ** 2
        if times[-1] > limit:
            warnings.warn(
                f"probe time {times[-1]:g} exceeds (min(W,H)/8)^2 = {limit:g}; "
                "finite-size effects may dominate", FiniteSizeWarning, stacklevel=3)

    @property
    def replica_ids(self) -> range:
        return range(self.replica_offset, self.replica_offset + self.n_replicas)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Build from the ``key = value`` format; keyword overrides win."""
        args = parse_config(text)
        args.update(overrides)
        if "geometry" not in args:
            raise ConfigError("config needs a size")
        return cls(**args)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)


CONFIG_KEYS = ("seed", "size", "boundary", "p_plus", "engine", "t_grid", "replicas", "L",
               "observables", "output", "replica_offset", "workers", "recurrence_L")


def parse_config(text: str) -> dict:
    """Parse the ``key = value`` config format into ExperimentConfig arguments.

    ``#`` starts a comment. Keys: seed, size (``N`` or ``WxH``), boundary,
    p_plus, engine, t_grid, replicas, L, observables, output,
    replica_offset, workers, recurrence_L. Lists are comma separated.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[experiment]\n" + text)
    kv = dict(parser["experiment"])
    unknown = set(kv) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    args = {}
    if "size" in kv or "boundary" in kv:
        w, h = parse_size(kv.get("size", "64"))
        args["geometry"] = LatticeGeometry(w, h, Boundary(kv.get("boundary", "torus").lower()))
    if "seed" in kv:
        args["master_seed"] = int(kv["seed"])
    if "p_plus" in kv:
        args["p_plus"] = float(kv["p_plus"])
    if "engine" in kv:
        args["engine"] = Engine(kv["engine"])
    if "t_grid" in kv:
        args["probe_times"] = parse_list(kv["t_grid"], float)
    if "replicas" in kv:
        args["n_replicas"] = int(kv["replicas"])
    if "L" in kv:
        args["L_values"] = parse_list(kv["L"], int)
    if "observables" in kv:
        args["observables"] = frozenset(parse_list(kv["observables"], str))
    if "output" in kv:
        args["output_dir"] = Path(kv["output"])
    for key in ("replica_offset", "workers", "recurrence_L"):
        if key in kv:
            args[key] = int(kv[key])
    return args


def parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ConfigError(f"bad size {text!r}")


def parse_list(text: str, kind=float) -> tuple:
    return tuple(kind(v.strip()) for v in text.split(",") if v.strip())


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class StatRecord:
    """One ensemble estimate. ``stderr`` is the replica-level standard error."""

    observable: str
    t: float
    L: int | None
    estimate: float
    stderr: float
    n: int
    n_excluded: int = 0
    geometry: str = ""

    def row(self) -> list[str]:
        return [self.observable, repr(self.t), "" if self.L is None else str(self.L),
                repr(self.estimate), repr(self.stderr), str(self.n), str(self.n_excluded),
                self.geometry]


STATS_HEADER = ["observable", "t", "L", "estimate", "stderr", "n", "n_excluded", "geometry"]


@dataclass
class RecurrenceLog:
    """Class history of the centre window of one replica.

    ``transitions`` holds ``(time, class)`` pairs; the first entry is the
    class at time 0 and consecutive classes differ.
    """

    replica: int
    L: int
    horizon: float
    transitions: list[tuple[float, WindowClass]] = field(default_factory=list)
    absorbed_time: float | None = None

    def record(self, t: float, kind: WindowClass):
        if not self.transitions or self.transitions[-1][1] is not kind:
            self.transitions.append((float(t), kind))

    @property
    def absorbed(self) -> bool:
        return self.absorbed_time is not None

    def visits(self) -> dict[str, int]:
        out = {k.value: 0 for k in WindowClass}
        for _, kind in self.transitions:
            out[kind.value] += 1
        return out

    def occupation(self) -> dict[str, float]:
        """Time spent in each class on ``[0, horizon]``."""
        out = {k.value: 0.0 for k in WindowClass}
        for (t0, kind), (t1, _) in zip(self.transitions, self.transitions[1:] + [(self.horizon, None)]):
            out[kind.value] += t1 - t0
        return out

    def to_json(self) -> str:
        return json.dumps({
            "replica": self.replica,
            "L": self.L,
            "horizon": self.horizon,
            "absorbed": self.absorbed,
            "absorbed_time": self.absorbed_time,
            "transitions": [[t, k.value] for t, k in self.transitions],
            "visits": self.visits(),
            "occupation": self.occupation(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RecurrenceLog":
        d = json.loads(line)
        return cls(d["replica"], d["L"], d["horizon"],
                   [(t, WindowClass(k)) for t, k in d["transitions"]], d["absorbed_time"])


@dataclass
class ReplicaResult:
    """Per-replica values keyed by ``(observable, t, L)``; None marks an exclusion."""

    replica: int
    values: dict[tuple[str, float, int | None], float | None]
    window_classes: dict[tuple[float, int], dict[str, int]] = field(default_factory=dict)
    recurrence: RecurrenceLog | None = None
    absorbed_time: float | None = None
    n_events: int = 0
    snapshots: list[tuple[str, bytes]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# single replica


def persistence_fraction(stats: SiteStats, t: float | None = None) -> float:
    """Fraction of sites that have never flipped.

    ``stats`` must be the accounting recorded at time ``t``; when ``t`` is
    given, stats containing a later flip are rejected.
    """
    if t is not None and np.any(stats.last_flip_time > t):
        raise ValueError(f"stats contain flips after t={t}")
    return float(stats.persistent.mean())


def _watch_mask(geometry: LatticeGeometry, window: Window) -> np.ndarray:
    mask = np.zeros(geometry.n_sites, dtype=np.uint8)
    cx, cy = window.center
    L = window.L
    for y in range(cy - L, cy + L + 1):
        for x in range(cx - L, cx + L + 1):
            mask[(y % geometry.height) * geometry.width + (x % geometry.width)] = 1
    return mask


def _observe(cfg: ExperimentConfig, state: SimState, t: float, out: ReplicaResult):
    obs = cfg.observables
    v = out.values
    if "wall_density" in obs:
        v[("wall_density", t, None)] = state.wall_density
    if "magnetization" in obs:
        m = state.magnetization
        v[("magnetization", t, None)] = m
        v[("abs_magnetization", t, None)] = abs(m)
    if "corners" in obs:
        v[("corner_density", t, None)] = state.corner_vertex_count / int(state.pvalid.sum())
    if "persistence" in obs:
        v[("persistence", t, None)] = float(np.mean(state.flip_count == 0))
        v[("max_energy_lowering_flips", t, None)] = float(state.low_count.max())
    v[("absorbed", t, None)] = float(state.absorbed_time is not None)
    v[("events_per_site", t, None)] = state.n_events / state.geometry.n_sites
    config = None
    if obs & {"windows", "clusters", "window_classes", "snapshots"}:
        config = state.config
    if "windows" in obs:
        for L in cfg.L_values:
            for name, value in grid_event_means(config, L).items():
                v[(f"window_{name}", t, L)] = value
    if "window_classes" in obs:
        for L in cfg.L_values:
            out.window_classes[(t, L)] = grid_class_counts(config, L)
    if "clusters" in obs:
        s = snapshot_summary(config)
        v[("origin_cluster", t, None)] = float(s["origin_cluster"])
        v[("n_clusters", t, None)] = float(s["n_clusters"])
        v[("max_cluster", t, None)] = float(s["max_cluster"])
        v[("wrapping", t, None)] = float(s["wraps"])
        v[("r_star_min", t, None)] = s["r_star_min"]
        v[("r_star_max", t, None)] = s["r_star_max"]
    if "snapshots" in obs:
        snap = Snapshot(config, t, cfg.master_seed, out.replica)
        out.snapshots.append((snapshot_name(out.replica, t), to_bytes(snap)))


def run_replica(cfg: ExperimentConfig, replica: int) -> ReplicaResult:
    """Simulate one replica and evaluate every enabled observable at each probe time."""
    g = cfg.geometry
    spec = RngSpec(cfg.master_seed, replica)
    state = SimState(init_random(g, cfg.p_plus, spec), cfg.engine)
    rng = spec.generator()
    out = ReplicaResult(replica, {})
    log = watch = window = None
    if "recurrence" in cfg.observables:
        window = Window(g.origin, cfg.recurrence_L)
        watch = _watch_mask(g, window)
        log = RecurrenceLog(replica, cfg.recurrence_L, cfg.probe_times[-1])
        log.record(0.0, classify_window(state.config, window).kind)
    for t in cfg.probe_times:
        while True:
            _, status = advance_to(state, rng, t, watch=watch)
            if status is not Status.WATCH:
                break
            log.record(state.time, classify_window(state.config, window).kind)
        _observe(cfg, state, t, out)
    out.absorbed_time = state.absorbed_time
    out.n_events = state.n_events
    if log is not None:
        log.absorbed_time = state.absorbed_time
        out.recurrence = log
    return out


# ---------------------------------------------------------------------------
# estimators


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error, both independent of the order of ``values``."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2 for x in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _geometry_tag(g: LatticeGeometry) -> str:
    return f"{g.width}x{g.height}/{g.boundary.value.lower()}"


def _keys(replicas: Sequence[ReplicaResult]) -> list[tuple[str, float, int | None]]:
    keys = set()
    for r in replicas:
        keys.update(r.values)
    return sorted(keys, key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2]))


def _estimate(replicas: Sequence[ReplicaResult], key, geometry: str = "",
              statistic: str = "mean") -> StatRecord:
    name, t, L = key
    raw = [r.values.get(key) for r in replicas]
    vals = [float(x) for x in raw if x is not None]
    excluded = len(raw) - len(vals)
    if statistic == "median":
        est = float(np.median(vals)) if vals else math.nan
        return StatRecord(f"median_{name}", t, L, est, math.nan, len(vals), excluded, geometry)
    est, se = mean_stderr(vals)
    return StatRecord(name, t, L, est, se, len(vals), excluded, geometry)


def _select(replicas, name: str, L: int | None = None, geometry: str = "") -> list[StatRecord]:
    keys = [k for k in _keys(replicas) if k[0] == name and (L is None or k[2] == L)]
    return [_estimate(replicas, k, geometry) for k in keys]


def estimate_corner_density(replicas: Sequence[ReplicaResult], geometry: str = "") -> list[StatRecord]:
    """Probability that a dual vertex hosts a corner, per probe time."""
    return _select(replicas, "corner_density", geometry=geometry)


def estimate_window_probs(replicas: Sequence[ReplicaResult], L: int, geometry: str = "") -> list[StatRecord]:
    """P(A_L), P(C_L+-), P(V_L+-), P(H_L+-) per probe time, averaged over the window grid."""
    out = []
    for ev in EVENTS:
        out.extend(_select(replicas, f"window_{ev}", L, geometry))
    return out


def window_containment_ok(replicas: Sequence[ReplicaResult], L: int) -> bool:
    """Every replica has P(C+) <= P(V+), P(H+) and P(C-) <= P(V-), P(H-) at every time."""
    for r in replicas:
        for (name, t, ell), value in r.values.items():
            if ell != L or name not in ("window_C+", "window_C-"):
                continue
            sign = name[-1]
            if value > r.values[(f"window_V{sign}", t, L)] or value > r.values[(f"window_H{sign}", t, L)]:
                return False
    return True


def compute_stats(replicas: Sequence[ReplicaResult], geometry: str = "") -> list[StatRecord]:
    """All estimates for a set of replicas, in a fixed order."""
    replicas = sorted(replicas, key=lambda r: r.replica)
    stats = [_estimate(replicas, k, geometry) for k in _keys(replicas)]
    for k in _keys(replicas):
        if k[0] in ("origin_cluster", "max_cluster"):
            stats.append(_estimate(replicas, k, geometry, statistic="median"))
    return stats


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    n_points: int


def fit_power_law(times: Sequence[float], values: Sequence[float]) -> FitResult:
    """Least-squares line through ``(log t, log value)``."""
    x = np.log(np.asarray(times, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2, len(x))


def fit_wall_density_exponent(records: Iterable[StatRecord], geometry: LatticeGeometry | None = None,
                              min_points: int = 4, min_decades: float = 1.5) -> FitResult:
    """Fit ``log(wall_density)`` against ``log(t)`` over the positive probe times.

    Raises InsufficientSpanError with fewer than ``min_points`` times or a
    span under ``min_decades`` decades.
    """
    pts = sorted((r.t, r.estimate) for r in records if r.observable == "wall_density" and r.t > 0)
    if len(pts) < min_points:
        raise InsufficientSpanError(f"need at least {min_points} positive probe times, got {len(pts)}")
    span = math.log10(pts[-1][0] / pts[0][0])
    if span < min_decades:
        raise InsufficientSpanError(
            f"probe times span {span:.2f} decades; at least {min_decades} are needed")
    if geometry is not None:
        limit = (min(geometry.width, geometry.height) / 8) ** 2
        if pts[-1][0] > limit:
            warnings.warn(f"fit uses t={pts[-1][0]:g} beyond (min(W,H)/8)^2 = {limit:g}",
                          FiniteSizeWarning, stacklevel=2)
    if any(v <= 0 for _, v in pts):
        raise InsufficientSpanError("wall density reached zero; the log-log fit is undefined")
    return fit_power_law([p[0] for p in pts], [p[1] for p in pts])


def persistence_exponent(records: Iterable[StatRecord]) -> FitResult:
    """Measured log-log slope of persistence over the positive probe times."""
    pts = sorted((r.t, r.estimate) for r in records if r.observable == "persistence" and r.t > 0)
    return fit_power_law([p[0] for p in pts], [p[1] for p in pts])


def _fraction_ci(k: int, n: int) -> dict:
    if n == 0:
        return {"fraction": math.nan, "stderr": math.nan, "ci95": [math.nan, math.nan], "n": 0}
    p = k / n
    se = math.sqrt(p * (1 - p) / n)
    # Wilson score interval
    z = 1.959963984540054
    d = 1 + z * z / n
    c = (p + z * z / (2 * n)) / d
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / d
    return {"fraction": p, "stderr": se, "ci95": [c - h, c + h], "n": n, "count": k}


def recurrence_summary(logs: Sequence[RecurrenceLog]) -> dict:
    """Visit and occupation statistics per replica and pooled.

    Fractions are taken over replicas that were not absorbed by the horizon.
    """
    logs = sorted(logs, key=lambda g: g.replica)
    live = [g for g in logs if not g.absorbed]
    per_replica = [{"replica": g.replica, "absorbed": g.absorbed, "visits": g.visits(),
                    "occupation": g.occupation()} for g in logs]
    visits = {k.value: sum(p["visits"][k.value] for p in per_replica) for k in WindowClass}
    occupation = {k.value: math.fsum(p["occupation"][k.value] for p in per_replica) for k in WindowClass}

    def visited(g, *kinds):
        v = g.visits()
        return any(v[k.value] > 0 for k in kinds)

    groups = {
        "CONSTANT_PLUS": (WindowClass.CONSTANT_PLUS,),
        "CONSTANT_MINUS": (WindowClass.CONSTANT_MINUS,),
        "STRIPE": (WindowClass.STRIPE_H, WindowClass.STRIPE_V),
        "SINGLE_STEP_WALL": (WindowClass.SINGLE_STEP_WALL,),
    }
    fractions = {name: _fraction_ci(sum(visited(g, *kinds) for g in live), len(live))
                 for name, kinds in groups.items()}
    both = sum(visited(g, WindowClass.CONSTANT_PLUS) and visited(g, WindowClass.CONSTANT_MINUS)
               for g in live)
    fractions["BOTH_CONSTANTS"] = _fraction_ci(both, len(live))
    total = math.fsum(g.horizon for g in logs)
    return {
        "n_replicas": len(logs),
        "n_absorbed": len(logs) - len(live),
        "visits": visits,
        "occupation": occupation,
        "occupation_fraction": {k: (v / total if total > 0 else math.nan) for k, v in occupation.items()},
        "visited_fraction": fractions,
        "per_replica": per_replica,
    }


# ---------------------------------------------------------------------------
# ensemble driver and outputs


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    replicas: list[ReplicaResult]
    stats: list[StatRecord]
    files: list[Path] = field(default_factory=list)

    @property
    def recurrence(self) -> list[RecurrenceLog]:
        return [r.recurrence for r in self.replicas if r.recurrence is not None]

    def stat(self, observable: str, t: float, L: int | None = None) -> StatRecord:
        for s in self.stats:
            if s.observable == observable and s.t == float(t) and s.L == L:
                return s
        raise KeyError((observable, t, L))

    def series(self, observable: str, L: int | None = None) -> list[StatRecord]:
        return [s for s in self.stats if s.observable == observable and s.L == L]


def run_ensemble(cfg: ExperimentConfig) -> EnsembleResult:
    """Run all replicas (in a thread pool when ``workers > 1``) and collect them in replica order."""
    ids = list(cfg.replica_ids)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            replicas = list(pool.map(lambda r: run_replica(cfg, r), ids))
    else:
        replicas = [run_replica(cfg, r) for r in ids]
    stats = compute_stats(replicas, _geometry_tag(cfg.geometry))
    result = EnsembleResult(cfg, replicas, stats)
    if cfg.output_dir is not None:
        result.files = write_outputs(result, cfg.output_dir)
    return result


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def stats_csv(stats: Sequence[StatRecord]) -> str:
    return _csv_text(STATS_HEADER, [s.row() for s in stats])


def replicas_csv(replicas: Sequence[ReplicaResult]) -> str:
    rows = []
    for r in sorted(replicas, key=lambda r: r.replica):
        for key in _keys([r]):
            name, t, L = key
            rows.append([r.replica, name, repr(t), "" if L is None else L, _fmt(r.values[key])])
    return _csv_text(["replica", "observable", "t", "L", "value"], rows)


def windows_csv(replicas: Sequence[ReplicaResult]) -> str:
    """Per probe time and L: grid class counts summed over replicas and mean event indicators."""
    classes = [k.value for k in WindowClass]
    keys = sorted({(t, L) for r in replicas for (name, t, L) in r.values if name.startswith("window_")}
                  | {k for r in replicas for k in r.window_classes})
    rows = []
    for t, L in keys:
        counts = [sum(r.window_classes.get((t, L), {}).get(c, 0) for r in replicas) for c in classes]
        have_counts = any((t, L) in r.window_classes for r in replicas)
        means = []
        for ev in EVENTS:
            vals = [r.values[(f"window_{ev}", t, L)] for r in replicas if (f"window_{ev}", t, L) in r.values]
            means.append(_fmt(mean_stderr(vals)[0]) if vals else "")
        rows.append([repr(t), L] + ([str(c) for c in counts] if have_counts else [""] * len(classes)) + means)
    return _csv_text(["t", "L"] + classes + [f"P({ev})" for ev in EVENTS], rows)


def read_replicas_csv(path) -> list[ReplicaResult]:
    out: dict[int, ReplicaResult] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            r = int(row["replica"])
            res = out.setdefault(r, ReplicaResult(r, {}))
            L = int(row["L"]) if row["L"] else None
            res.values[(row["observable"], float(row["t"]), L)] = float(row["value"]) if row["value"] else None
    return [out[k] for k in sorted(out)]


def pool_directories(directories: Iterable, geometry: str = "") -> list[StatRecord]:
    """Estimates over the union of replicas written by several runs.

    Raises ConfigError if two runs share a replica index.
    """
    replicas = []
    seen = set()
    for d in directories:
        for r in read_replicas_csv(Path(d) / "replicas.csv"):
            if r.replica in seen:
                raise ConfigError(f"replica {r.replica} appears in more than one run")
            seen.add(r.replica)
            replicas.append(r)
    return compute_stats(replicas, geometry)


def write_outputs(result: EnsembleResult, directory) -> list[Path]:
    """Write stats.csv, replicas.csv, windows.csv, recurrence.jsonl and snapshots.

    A ``manifest.json`` listing the written files is always attempted; on an
    I/O failure it is marked partial and ExperimentIOError is raised.
    """
    directory = Path(directory)
    written: list[Path] = []
    manifest = {"status": "partial", "files": [], "error": None}

    def put(path: Path, data):
        if isinstance(data, str):
            path.write_text(data)
        else:
            path.write_bytes(data)
        written.append(path)
        manifest["files"].append(str(path.relative_to(directory)))

    try:
        directory.mkdir(parents=True, exist_ok=True)
        put(directory / "stats.csv", stats_csv(result.stats))
        put(directory / "replicas.csv", replicas_csv(result.replicas))
        if any(k[0].startswith("window_") for r in result.replicas for k in r.values) or any(
                r.window_classes for r in result.replicas):
            put(directory / "windows.csv", windows_csv(result.replicas))
        logs = result.recurrence
        if logs:
            put(directory / "recurrence.jsonl", "".join(g.to_json() + "\n" for g in logs))
        snaps = [s for r in result.replicas for s in r.snapshots]
        if snaps:
            (directory / "snapshots").mkdir(exist_ok=True)
            for name, data in snaps:
                put(directory / "snapshots" / name, data)
        manifest["status"] = "complete"
    except OSError as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        try:
            (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        except OSError:
            pass
        raise ExperimentIOError(f"writing outputs to {directory} failed: {exc}", manifest) from exc
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written


def with_replicas(cfg: ExperimentConfig, n_replicas: int, replica_offset: int = 0, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` covering a different block of replica indices."""
    return replace(cfg, n_replicas=n_replicas, replica_offset=replica_offset, **changes)


__all__ = [
    "DEFAULT_PROBE_TIMES", "EnsembleResult", "ExperimentConfig", "ExperimentIOError", "FiniteSizeWarning",
    "FitResult", "InsufficientSpanError", "RecurrenceLog", "ReplicaResult", "StatRecord", "compute_stats",
    "estimate_corner_density", "estimate_window_probs", "fit_power_law", "fit_wall_density_exponent",
    "mean_stderr", "parse_config", "persistence_exponent", "persistence_fraction", "pool_directories", "read_replicas_csv",
    "recurrence_summary", "run_ensemble", "run_replica", "window_containment_ok", "with_replicas",
    "write_outputs",
]
