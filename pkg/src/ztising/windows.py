"""Classification of finite windows against constant and absorbing states."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .contours import (
    DomainWall,
    EAbsence,
    Window,
    WallClass,
    classify_walls,
    decompose_walls,
    extract_contours,
)
from .lattice import Boundary, ConfigError, SpinConfig, rate_classes

_OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


class WindowClass(str, enum.Enum):
    CONSTANT_PLUS = "CONSTANT_PLUS"
    CONSTANT_MINUS = "CONSTANT_MINUS"
    STRIPE_H = "STRIPE_H"
    STRIPE_V = "STRIPE_V"
    SINGLE_STEP_WALL = "SINGLE_STEP_WALL"
    PROVEN_E_ABSENT = "PROVEN_E_ABSENT"
    OTHER = "OTHER"

    def swapped(self) -> "WindowClass":
        if self is WindowClass.CONSTANT_PLUS:
            return WindowClass.CONSTANT_MINUS
        if self is WindowClass.CONSTANT_MINUS:
            return WindowClass.CONSTANT_PLUS
        return self


STRIPES = (WindowClass.STRIPE_H, WindowClass.STRIPE_V)
EVENTS = ("C+", "C-", "A", "V+", "H+", "V-", "H-")


@dataclass(frozen=True)
class WindowResult:
    """Class of one window plus the geometry needed for recurrence statistics.

    ``wall_offsets`` lists the dual levels of stripe walls relative to the
    centre (a wall at level ``k`` runs between primal rows/columns ``k`` and
    ``k + 1``). ``step_offset`` is the signed position of the single step,
    ``step_axis`` the orientation of its wall.
    """

    kind: WindowClass
    wall_offsets: tuple[int, ...] = ()
    step_offset: float | None = None
    step_axis: str | None = None
    e_absence: EAbsence | None = None

    @property
    def wall_next_to_center(self) -> bool:
        return self.kind in STRIPES and any(k in (-1, 0) for k in self.wall_offsets)


def _stripe(walls: list[DomainWall]) -> WindowResult | None:
    classes = {w.classification for w in walls}
    for orient, kind, axis in ((WallClass.FLAT_H, WindowClass.STRIPE_H, 1),
                               (WallClass.FLAT_V, WindowClass.STRIPE_V, 0)):
        if classes == {orient}:
            levels = sorted(w.vertices[0][axis] for w in walls)
            if all(b - a >= 2 for a, b in zip(levels, levels[1:])):
                return WindowResult(kind, tuple(levels))
    return None


def _single_step(walls: list[DomainWall]) -> WindowResult | None:
    if len(walls) != 1 or walls[0].closed:
        return None
    wall = walls[0]
    for main, axis in (("E", "H"), ("N", "V")):
        back = _OPPOSITE[main]
        moves, verts = wall.moves, wall.vertices
        if back in moves:
            moves = [_OPPOSITE[m] for m in reversed(moves)]
            verts = verts[::-1]
        if back in moves or moves[0] != main or moves[-1] != main:
            continue
        steps = [k for k, m in enumerate(moves) if m != main]
        if len(steps) != 1:
            continue
        i, j = verts[steps[0]]
        offset = i + 0.5 if axis == "H" else j + 0.5
        return WindowResult(WindowClass.SINGLE_STEP_WALL, step_offset=offset, step_axis=axis)
    return None


def classify_window(config: SpinConfig, window: Window) -> WindowResult:
    """Class of the window, resolved by the precedence
    CONSTANT > STRIPE > SINGLE_STEP_WALL > PROVEN_E_ABSENT > OTHER."""
    block = window.spins(config)
    if np.all(block == 1):
        return WindowResult(WindowClass.CONSTANT_PLUS)
    if np.all(block == -1):
        return WindowResult(WindowClass.CONSTANT_MINUS)
    walls = decompose_walls(extract_contours(config), window)
    found = _stripe(walls) or _single_step(walls)
    if found is not None:
        return found
    verdict = classify_walls(walls)
    if verdict.proven:
        return WindowResult(WindowClass.PROVEN_E_ABSENT, e_absence=verdict)
    return WindowResult(WindowClass.OTHER, e_absence=verdict)


def is_absorbing_global(config: SpinConfig) -> bool:
    """True when no site of the torus can ever flip again."""
    if config.geometry.boundary is not Boundary.TORUS:
        raise ConfigError("global absorption is defined on the torus")
    return not rate_classes(config).any()


def _block_events(blocks: np.ndarray) -> dict[str, np.ndarray]:
    """Event indicators for a stack of square blocks ``(..., s, s)`` indexed ``[row, col]``."""
    plus = blocks == 1
    minus = ~plus
    c_plus = plus.all(axis=(-2, -1))
    c_minus = minus.all(axis=(-2, -1))
    rows_const = (blocks == blocks[..., :, :1]).all(axis=(-2, -1))
    cols_const = (blocks == blocks[..., :1, :]).all(axis=(-2, -1))
    row_walls = blocks[..., 1:, 0] != blocks[..., :-1, 0]
    col_walls = blocks[..., 0, 1:] != blocks[..., 0, :-1]
    stripe_h = rows_const & ~(row_walls[..., 1:] & row_walls[..., :-1]).any(axis=-1)
    stripe_v = cols_const & ~(col_walls[..., 1:] & col_walls[..., :-1]).any(axis=-1)
    return {
        "C+": c_plus,
        "C-": c_minus,
        "A": c_plus | c_minus | stripe_h | stripe_v,
        "V+": plus.all(axis=-2).any(axis=-1),
        "H+": plus.all(axis=-1).any(axis=-1),
        "V-": minus.all(axis=-2).any(axis=-1),
        "H-": minus.all(axis=-1).any(axis=-1),
    }


def window_probability_events(config: SpinConfig, L: int, center=None) -> dict[str, int]:
    """Indicators of C_L+-, A_L, V_L+- and H_L+- for the window at ``center``."""
    center = config.geometry.origin if center is None else center
    block = Window(tuple(center), L).spins(config)
    return {k: int(v) for k, v in _block_events(block).items()}


def grid_centers(geometry, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Centres of a grid of non-overlapping valid windows along x and y."""
    side = 2 * L + 1
    if geometry.boundary is Boundary.TORUS:
        Window(geometry.origin, L).validate(geometry)
        return (L + side * np.arange(geometry.width // side), L + side * np.arange(geometry.height // side))
    Window((L + 1, L + 1), L).validate(geometry)
    xs = np.arange(L + 1, geometry.width - 1 - L, side)
    ys = np.arange(L + 1, geometry.height - 1 - L, side)
    return xs, ys


def grid_blocks(config: SpinConfig, L: int) -> np.ndarray:
    """Window spins for the whole grid, shape ``(ny, nx, 2L+1, 2L+1)``."""
    g = config.geometry
    cx, cy = grid_centers(g, L)
    off = np.arange(-L, L + 1)
    ys = (cy[:, None] + off[None, :]) % g.height
    xs = (cx[:, None] + off[None, :]) % g.width
    return config.spins[ys[:, None, :, None], xs[None, :, None, :]]


def grid_event_means(config: SpinConfig, L: int) -> dict[str, float]:
    """Each event indicator averaged over the grid of windows."""
    ev = _block_events(grid_blocks(config, L))
    return {k: float(v.mean()) for k, v in ev.items()}


def grid_class_counts(config: SpinConfig, L: int) -> dict[str, int]:
    """Number of grid windows in each class."""
    counts = {k.value: 0 for k in WindowClass}
    cx, cy = grid_centers(config.geometry, L)
    ev = _block_events(grid_blocks(config, L))
    for a, y in enumerate(cy.tolist()):
        for b, x in enumerate(cx.tolist()):
            if ev["C+"][a, b]:
                counts["CONSTANT_PLUS"] += 1
            elif ev["C-"][a, b]:
                counts["CONSTANT_MINUS"] += 1
            else:
                counts[classify_window(config, Window((x, y), L)).kind.value] += 1
    return counts
