"""Constructors for hand-built test configurations."""

from __future__ import annotations

import numpy as np

from ztising.lattice import Boundary, LatticeGeometry, SpinConfig


def stripes(width: int, height: int, widths, horizontal: bool = True, start: int = 1) -> SpinConfig:
    """Torus configuration of alternating stripes with the given widths (must tile the axis)."""
    axis_len = height if horizontal else width
    if sum(widths) != axis_len:
        raise ValueError("stripe widths must tile the lattice")
    line = np.concatenate([np.full(w, start * (-1) ** k, dtype=np.int8) for k, w in enumerate(widths)])
    if horizontal:
        spins = np.repeat(line[:, None], width, axis=1)
    else:
        spins = np.repeat(line[None, :], height, axis=0)
    return SpinConfig(LatticeGeometry(width, height), spins)


def checkerboard(width: int, height: int, boundary=Boundary.TORUS) -> SpinConfig:
    ys, xs = np.mgrid[0:height, 0:width]
    return SpinConfig(LatticeGeometry(width, height, boundary), np.where((xs + ys) % 2 == 0, 1, -1))


def with_block(geometry: LatticeGeometry, x0: int, y0: int, w: int, h: int, sign: int = -1) -> SpinConfig:
    spins = np.full((geometry.height, geometry.width), -sign, dtype=np.int8)
    spins[y0:y0 + h, x0:x0 + w] = sign
    return SpinConfig(geometry, spins)


def cross(n: int = 16, center=None) -> SpinConfig:
    """Quadrant pattern whose two flat walls meet at the dual vertex just below-left of ``center``."""
    cx, cy = (n // 2, n // 2) if center is None else center
    ys, xs = np.mgrid[0:n, 0:n]
    spins = np.where(xs >= cx, 1, -1) * np.where(ys >= cy, 1, -1)
    return SpinConfig(LatticeGeometry(n, n, Boundary.FREE), spins)


def staircase(n: int = 16, center=None, boundary=Boundary.FREE) -> SpinConfig:
    """Plus below the diagonal through ``center``: one E,N,E,N... wall."""
    cx, cy = (n // 2, n // 2) if center is None else center
    ys, xs = np.mgrid[0:n, 0:n]
    return SpinConfig(LatticeGeometry(n, n, boundary), np.where(xs - cx >= ys - cy, 1, -1))


def plaquette(n: int = 16, site=None, sign: int = -1) -> SpinConfig:
    """Constant configuration with the single site ``site`` flipped to ``sign``."""
    g = LatticeGeometry(n, n)
    return SpinConfig.constant(g, -sign).flipped(g.origin if site is None else site)
