"""Exact event-driven zero-temperature Glauber dynamics of the 2D Ising ferromagnet."""

from .kernels import BACKEND
from .lattice import (
    Boundary,
    ConfigError,
    LatticeGeometry,
    OutOfBoundsError,
    RngSpec,
    SpinConfig,
    delta_H,
    flip_rate,
    init_random,
    magnetization,
    neighbors,
    wall_density,
)

__version__ = "0.1.0"
