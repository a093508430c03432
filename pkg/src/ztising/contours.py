"""Dual-lattice contours: unsatisfied edges, domain walls and corner counts.

A dual vertex is identified by the primal site at the lower-left corner of
its plaquette, so dual vertex ``(i, j)`` sits at ``(i + 1/2, j + 1/2)``. The
unsatisfied primal bond ``(x, y)-(x+1, y)`` carries the vertical dual edge
between dual vertices ``(x, y-1)`` and ``(x, y)``; the bond ``(x, y)-(x, y+1)``
carries the horizontal dual edge between ``(x-1, y)`` and ``(x, y)``.

Window computations use a local frame centred on the window: primal offsets
run over ``[-L, L]``, the window's dual vertices over ``[-L, L-1]``, and wall
endpoints sit one dual step outside that range.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import Boundary, ConfigError, LatticeGeometry, SpinConfig, unsatisfied_bonds


class WallClass(str, enum.Enum):
    FLAT_H = "FLAT_H"
    FLAT_V = "FLAT_V"
    MONO_NE = "MONO_NE"
    MONO_SE = "MONO_SE"
    NON_MONOTONIC = "NON_MONOTONIC"


_MOVE = {(1, 0): "E", (-1, 0): "W", (0, 1): "N", (0, -1): "S"}
_STEP = {v: k for k, v in _MOVE.items()}
_OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


@dataclass(frozen=True)
class Window:
    """The square of side ``2L + 1`` centred on ``center``."""

    center: tuple[int, int]
    L: int

    def validate(self, geometry: LatticeGeometry) -> "Window":
        cx, cy = geometry.check_site(self.center)
        if self.L < 1:
            raise ConfigError("window half-width L must be positive")
        span = 2 * self.L + 3  # window plus one dual site of margin on each side
        if geometry.boundary is Boundary.TORUS:
            if span > min(geometry.width, geometry.height):
                raise ConfigError(f"window L={self.L} does not fit a {geometry.width}x{geometry.height} torus")
        else:
            lo, hx, hy = self.L + 1, geometry.width - 2 - self.L, geometry.height - 2 - self.L
            if not (lo <= cx <= hx and lo <= cy <= hy):
                raise ConfigError(f"window {self} needs a one-site margin inside the free lattice")
        return self

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    def spins(self, config: SpinConfig) -> np.ndarray:
        """Window spins as a ``(2L+1, 2L+1)`` array indexed ``[j + L, i + L]``."""
        self.validate(config.geometry)
        g = config.geometry
        cx, cy = self.center
        ys = np.arange(cy - self.L, cy + self.L + 1) % g.height
        xs = np.arange(cx - self.L, cx + self.L + 1) % g.width
        return config.spins[np.ix_(ys, xs)]


@dataclass(frozen=True, eq=False)
class ContourSet:
    """The set of unsatisfied dual edges of a configuration."""

    geometry: LatticeGeometry
    east: np.ndarray
    north: np.ndarray

    def __len__(self) -> int:
        return int(self.east.sum()) + int(self.north.sum())

    def __eq__(self, other):
        if not isinstance(other, ContourSet):
            return NotImplemented
        return (self.geometry == other.geometry and np.array_equal(self.east, other.east)
                and np.array_equal(self.north, other.north))

    __hash__ = None

    def edges(self) -> set[tuple[str, int, int]]:
        """Edges named by the primal bond they bisect: ``("E"|"N", x, y)``."""
        ey, ex = np.nonzero(self.east)
        ny, nx = np.nonzero(self.north)
        return {("E", int(x), int(y)) for x, y in zip(ex, ey)} | {("N", int(x), int(y)) for x, y in zip(nx, ny)}

    @cached_property
    def corner_counts(self) -> np.ndarray:
        """Perpendicular incident-edge pairs at every dual vertex, shape ``(H, W)``."""
        e = self.east.astype(np.int8)
        n = self.north.astype(np.int8)
        c = (e + np.roll(e, -1, axis=0)) * (n + np.roll(n, -1, axis=1))
        if self.geometry.boundary is Boundary.FREE:
            c[-1, :] = 0
            c[:, -1] = 0
        return c

    def flipped(self, site) -> "ContourSet":
        """Contours after flipping ``site``: the four edges around it toggle."""
        g = self.geometry
        x, y = g.check_site(site)
        east, north = self.east.copy(), self.north.copy()
        torus = g.boundary is Boundary.TORUS
        if torus or x + 1 < g.width:
            east[y, x] ^= True
        if torus or x > 0:
            east[y, (x - 1) % g.width] ^= True
        if torus or y + 1 < g.height:
            north[y, x] ^= True
        if torus or y > 0:
            north[(y - 1) % g.height, x] ^= True
        return ContourSet(g, east, north)

    def reconstruct(self, site, sign: int) -> SpinConfig:
        """Rebuild the configuration whose contours these are, given one spin."""
        g = self.geometry
        parity_col = np.concatenate([[0], np.cumsum(self.north[:-1, 0])]) % 2
        parity = (parity_col[:, None] + np.concatenate(
            [np.zeros((g.height, 1), dtype=np.int64), np.cumsum(self.east[:, :-1], axis=1)], axis=1)) % 2
        spins = np.where(parity == 0, 1, -1).astype(np.int8)
        x, y = g.check_site(site)
        if spins[y, x] != sign:
            spins = -spins
        return SpinConfig(g, spins)


def extract_contours(config: SpinConfig) -> ContourSet:
    east, north = unsatisfied_bonds(config)
    return ContourSet(config.geometry, east, north)


def _window_bonds(contours: ContourSet, window: Window):
    """Unsatisfied bonds joining window sites, in the window's local frame.

    Returns ``east[j + L, i + L]`` for bonds ``(i, j)-(i+1, j)`` with
    ``i in [-L, L-1]`` and ``north[j + L, i + L]`` for ``(i, j)-(i, j+1)``
    with ``j in [-L, L-1]``.
    """
    g = contours.geometry
    window.validate(g)
    L = window.L
    cx, cy = window.center
    ys = np.arange(cy - L, cy + L + 1) % g.height
    xs = np.arange(cx - L, cx + L + 1) % g.width
    east = contours.east[np.ix_(ys, xs[:-1])]
    north = contours.north[np.ix_(ys[:-1], xs)]
    return east, north


def corner_count(contours: ContourSet, window: Window) -> int:
    """Number of corners ``M_L`` at the window's dual vertices.

    A degree-2 vertex with perpendicular edges contributes 1, a degree-4
    vertex contributes 4.
    """
    east, north = _window_bonds(contours, window)
    e = east.astype(np.int64)
    n = north.astype(np.int64)
    # dual vertex (i, j): S = east[j], N = east[j+1], W = north[:, i], E = north[:, i+1]
    vertical = e[:-1, :] + e[1:, :]
    horizontal = n[:, :-1] + n[:, 1:]
    return int((vertical * horizontal).sum())


@dataclass(frozen=True)
class DomainWall:
    """A path of unsatisfied dual edges in a window's local frame."""

    vertices: tuple[tuple[int, int], ...]
    closed: bool = False

    @property
    def moves(self) -> list[str]:
        v = self.vertices
        return [_MOVE[(b[0] - a[0], b[1] - a[1])] for a, b in zip(v, v[1:])]

    @property
    def edges(self) -> set[frozenset]:
        v = self.vertices
        return {frozenset((a, b)) for a, b in zip(v, v[1:])}

    @property
    def corners(self) -> int:
        m = self.moves
        turns = sum(1 for a, b in zip(m, m[1:]) if a != b)
        if self.closed and m and m[0] != m[-1]:
            turns += 1
        return turns

    @property
    def classification(self) -> WallClass:
        if self.closed:
            return WallClass.NON_MONOTONIC
        return classify_moves(self.moves)

    @property
    def spanning_rectangle(self) -> tuple[int, int, int, int]:
        """``(i_min, j_min, i_max, j_max)`` of the endpoints (of the whole path
        for closed or non-monotonic walls)."""
        if self.closed or self.classification is WallClass.NON_MONOTONIC:
            pts = self.vertices
        else:
            pts = (self.vertices[0], self.vertices[-1])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))

    @classmethod
    def from_moves(cls, start, moves) -> "DomainWall":
        pts = [tuple(start)]
        for m in moves:
            dx, dy = _STEP[m]
            pts.append((pts[-1][0] + dx, pts[-1][1] + dy))
        return cls(tuple(pts), closed=len(pts) > 2 and pts[0] == pts[-1])


def classify_moves(moves) -> WallClass:
    kinds = set(moves)
    if not kinds:
        raise ValueError("empty wall")
    if kinds <= {"E"} or kinds <= {"W"}:
        return WallClass.FLAT_H
    if kinds <= {"N"} or kinds <= {"S"}:
        return WallClass.FLAT_V
    if kinds <= {"N", "E"} or kinds <= {"S", "W"}:
        return WallClass.MONO_NE
    if kinds <= {"S", "E"} or kinds <= {"N", "W"}:
        return WallClass.MONO_SE
    return WallClass.NON_MONOTONIC


def is_monotonic(wall: DomainWall) -> bool:
    """True when one direction of travel uses only N/E moves or only S/E moves."""
    if not wall.moves:
        raise ValueError("empty wall")
    return wall.classification is not WallClass.NON_MONOTONIC


def _window_graph(contours: ContourSet, window: Window):
    east, north = _window_bonds(contours, window)
    L = window.L
    adj: dict[tuple[int, int], dict[str, tuple[int, int]]] = {}

    def link(a, b, d):
        adj.setdefault(a, {})[d] = b
        adj.setdefault(b, {})[_OPPOSITE[d]] = a

    for jj, ii in zip(*np.nonzero(east)):
        i, j = int(ii) - L, int(jj) - L
        link((i, j - 1), (i, j), "N")
    for jj, ii in zip(*np.nonzero(north)):
        i, j = int(ii) - L, int(jj) - L
        link((i - 1, j), (i, j), "E")
    return adj


def decompose_walls(contours: ContourSet, window: Window) -> list[DomainWall]:
    """Split the window's contour edges into edge-disjoint walls.

    Walls start at endpoints just outside the window. At degree-4 vertices
    edges pair straight through, so a cross is two flat walls. Edges left
    over after all open walls are traced form closed walls.
    """
    adj = _window_graph(contours, window)
    L = window.L
    inside = lambda v: -L <= v[0] <= L - 1 and -L <= v[1] <= L - 1  # noqa: E731
    used: set[frozenset] = set()
    walls = []

    def trace(start, direction):
        path = [start]
        cur, d = start, direction
        while True:
            nxt = adj[cur][d]
            used.add(frozenset((cur, nxt)))
            path.append(nxt)
            if not inside(nxt):
                return DomainWall(tuple(path))
            out = adj[nxt]
            if len(out) == 4:
                nd = d
            else:
                (nd,) = [k for k in out if k != _OPPOSITE[d]]
            if frozenset((nxt, out[nd])) in used:
                return DomainWall(tuple(path), closed=nxt == start)
            cur, d = nxt, nd

    for v in sorted(v for v in adj if not inside(v)):
        (d,) = adj[v].keys()
        if frozenset((v, adj[v][d])) not in used:
            walls.append(trace(v, d))
    for v in sorted(adj):
        for d in sorted(adj[v]):
            if frozenset((v, adj[v][d])) not in used:
                walls.append(trace(v, d))
    return walls


@dataclass(frozen=True)
class EAbsence:
    """Outcome of the sufficient e-absence checks.

    ``reason`` is ``"A"`` (a non-monotonic wall), ``"B"`` (two parallel flat
    walls one lattice spacing apart) or ``"C"`` (overlapping spanning
    rectangles outside the cross case). ``None`` means none of the checks
    fired, which does not make the window recurrent.
    """

    reason: str | None

    @property
    def proven(self) -> bool:
        return self.reason is not None

    def __str__(self):
        return f"PROVEN_E_ABSENT({self.reason})" if self.reason else "NOT_CLASSIFIED"


NOT_CLASSIFIED = EAbsence(None)


def _rects_overlap(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def is_cross(walls: list[DomainWall]) -> bool:
    return len(walls) == 2 and {w.classification for w in walls} == {WallClass.FLAT_H, WallClass.FLAT_V}


def classify_walls(walls: list[DomainWall]) -> EAbsence:
    classes = [w.classification for w in walls]
    if WallClass.NON_MONOTONIC in classes:
        return EAbsence("A")
    for orient, axis in ((WallClass.FLAT_H, 1), (WallClass.FLAT_V, 0)):
        levels = sorted(w.vertices[0][axis] for w, c in zip(walls, classes) if c is orient)
        if any(b - a == 1 for a, b in zip(levels, levels[1:])):
            return EAbsence("B")
    if is_cross(walls):
        return NOT_CLASSIFIED
    rects = [w.spanning_rectangle for w in walls]
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            if _rects_overlap(rects[a], rects[b]):
                return EAbsence("C")
    return NOT_CLASSIFIED


def classify_e_absent(config: SpinConfig, window: Window) -> EAbsence:
    return classify_walls(decompose_walls(extract_contours(config), window))


def check_corner_bound(config: SpinConfig, window: Window, contours: ContourSet | None = None) -> bool:
    """False only when an unclassified window has more than ``4(2L+1)`` corners.

    ``contours`` may be passed to reuse one extraction across many windows.
    """
    if contours is None:
        contours = extract_contours(config)
    if classify_walls(decompose_walls(contours, window)).proven:
        return True
    return corner_count(contours, window) <= 4 * (2 * window.L + 1)


def window_report(config: SpinConfig, window: Window) -> dict:
    """JSON-ready summary of one window."""
    contours = extract_contours(config)
    walls = decompose_walls(contours, window)
    verdict = classify_walls(walls)
    m = corner_count(contours, window)
    return {
        "center": list(window.center),
        "L": window.L,
        "M_L": m,
        "walls": [
            {"class": w.classification.value, "corners": w.corners,
             "rect": list(w.spanning_rectangle), "closed": w.closed}
            for w in walls
        ],
        "e_absent": verdict.reason,
        "bound_ok": verdict.proven or m <= 4 * (2 * window.L + 1),
    }
