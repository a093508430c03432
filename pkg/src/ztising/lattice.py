"""Lattice geometry, spin configurations, initial conditions and the local energy rule.

Coordinates are ``(x, y)`` pairs with ``0 <= x < width`` and ``0 <= y < height``.
Spin arrays are indexed ``spins[y, x]`` and flattened row-major, so the flat
index of ``(x, y)`` is ``y * width + x``. North is ``+y`` and East is ``+x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Rejected configuration or parameter."""


class OutOfBoundsError(IndexError):
    """Site coordinate outside the lattice."""


class Boundary(str, enum.Enum):
    TORUS = "torus"
    FREE = "free"


# Neighbour slots used by every flat neighbour table: E, W, N, S.
EAST, WEST, NORTH, SOUTH = 0, 1, 2, 3
_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class LatticeGeometry:
    width: int
    height: int
    boundary: Boundary = Boundary.TORUS

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ConfigError(f"lattice must be at least 4x4, got {self.width}x{self.height}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    @property
    def n_bonds(self) -> int:
        if self.boundary is Boundary.TORUS:
            return 2 * self.n_sites
        return (self.width - 1) * self.height + self.width * (self.height - 1)

    @property
    def origin(self) -> tuple[int, int]:
        """The reference site playing the role of the origin (lattice centre)."""
        return (self.width // 2, self.height // 2)

    def check_site(self, site) -> tuple[int, int]:
        x, y = int(site[0]), int(site[1])
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise OutOfBoundsError(f"site {(x, y)} outside {self.width}x{self.height} lattice")
        return x, y

    def index(self, site) -> int:
        x, y = self.check_site(site)
        return y * self.width + x

    def coords(self, index: int) -> tuple[int, int]:
        return (int(index) % self.width, int(index) // self.width)

    def neighbor_table(self) -> np.ndarray:
        """Flat ``(N, 4)`` int32 table of neighbour indices in E, W, N, S order.

        Missing neighbours (FREE boundary) are ``-1``.
        """
        w, h = self.width, self.height
        ys, xs = np.divmod(np.arange(w * h), w)
        table = np.empty((w * h, 4), dtype=np.int32)
        for slot, (dx, dy) in enumerate(_STEPS):
            nx, ny = xs + dx, ys + dy
            if self.boundary is Boundary.TORUS:
                table[:, slot] = (ny % h) * w + (nx % w)
            else:
                ok = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
                table[:, slot] = np.where(ok, ny * w + nx, -1)
        return table

    def degrees(self) -> np.ndarray:
        return (self.neighbor_table() >= 0).sum(axis=1).astype(np.int8)


@dataclass(frozen=True)
class RngSpec:
    """Seed coordinates of one random stream.

    Streams for the initial condition and for the dynamics are spawned as
    separate children so that they never overlap.
    """

    master_seed: int
    stream_id: int = 0

    INIT = 0
    DYNAMICS = 1

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise ConfigError("stream_id must be non-negative")

    def seed_sequence(self, purpose: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id, purpose))

    def generator(self, purpose: int = DYNAMICS) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence(purpose)))


@dataclass(frozen=True, eq=False)
class SpinConfig:
    geometry: LatticeGeometry
    spins: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.geometry
        spins = np.asarray(self.spins)
        if spins.size != g.n_sites:
            raise ConfigError(f"expected {g.n_sites} spins, got {spins.size}")
        if not np.all((spins == 1) | (spins == -1)):
            raise ConfigError("spins must be exactly -1 or +1")
        spins = np.ascontiguousarray(spins.reshape(g.height, g.width), dtype=np.int8)
        spins.setflags(write=False)
        object.__setattr__(self, "spins", spins)

    def __eq__(self, other):
        if not isinstance(other, SpinConfig):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.spins, other.spins)

    __hash__ = None

    @property
    def flat(self) -> np.ndarray:
        return self.spins.reshape(-1)

    def __getitem__(self, site) -> int:
        x, y = self.geometry.check_site(site)
        return int(self.spins[y, x])

    def flipped(self, site=None) -> "SpinConfig":
        """Copy with one site flipped, or the global spin flip if ``site`` is None."""
        if site is None:
            return SpinConfig(self.geometry, -self.spins)
        x, y = self.geometry.check_site(site)
        spins = self.spins.copy()
        spins[y, x] = -spins[y, x]
        return SpinConfig(self.geometry, spins)

    @classmethod
    def constant(cls, geometry: LatticeGeometry, sign: int = 1) -> "SpinConfig":
        return cls(geometry, np.full((geometry.height, geometry.width), sign, dtype=np.int8))

    @classmethod
    def from_rows(cls, rows, boundary=Boundary.TORUS) -> "SpinConfig":
        """Build from a list of strings of ``+``/``-`` (first string is row ``y = 0``)."""
        arr = np.array([[1 if c == "+" else -1 for c in row] for row in rows], dtype=np.int8)
        return cls(LatticeGeometry(arr.shape[1], arr.shape[0], boundary), arr)


def init_random(geometry: LatticeGeometry, p_plus: float = 0.5, rng: RngSpec | None = None) -> SpinConfig:
    """Sample a configuration from the Bernoulli product measure.

    Each site is independently ``+1`` with probability ``p_plus``.
    """
    if not 0.0 <= p_plus <= 1.0:
        raise ConfigError(f"p_plus must lie in [0, 1], got {p_plus!r}")
    rng = RngSpec(0) if rng is None else rng
    u = rng.generator(RngSpec.INIT).random(geometry.n_sites)
    spins = np.where(u < p_plus, 1, -1).astype(np.int8)
    return SpinConfig(geometry, spins)


def neighbors(geometry: LatticeGeometry, site) -> list[tuple[int, int]]:
    x, y = geometry.check_site(site)
    out = []
    for dx, dy in _STEPS:
        nx, ny = x + dx, y + dy
        if geometry.boundary is Boundary.TORUS:
            out.append((nx % geometry.width, ny % geometry.height))
        elif 0 <= nx < geometry.width and 0 <= ny < geometry.height:
            out.append((nx, ny))
    return out


def delta_H(config: SpinConfig, site) -> int:
    """Energy change of flipping ``site``: ``2 * s_x * sum of neighbour spins``."""
    s = config[site]
    return 2 * s * sum(config[n] for n in neighbors(config.geometry, site))


def flip_rate(config: SpinConfig, site) -> float:
    dh = delta_H(config, site)
    if dh < 0:
        return 1.0
    if dh == 0:
        return 0.5
    return 0.0


def unsatisfied_bonds(config: SpinConfig) -> tuple[np.ndarray, np.ndarray]:
    """Boolean ``(height, width)`` arrays of unsatisfied bonds.

    ``east[y, x]`` is the bond ``(x, y)-(x+1, y)`` and ``north[y, x]`` the bond
    ``(x, y)-(x, y+1)``. On a FREE lattice the bonds leaving the last column
    and row do not exist and are always False.
    """
    s = config.spins
    east = s != np.roll(s, -1, axis=1)
    north = s != np.roll(s, -1, axis=0)
    if config.geometry.boundary is Boundary.FREE:
        east[:, -1] = False
        north[-1, :] = False
    return east, north


def disagreement_counts(config: SpinConfig) -> np.ndarray:
    """Number of disagreeing neighbours of every site, shape ``(height, width)``."""
    east, north = unsatisfied_bonds(config)
    k = east.astype(np.int8) + north
    k += np.roll(east, 1, axis=1)
    # on FREE lattices the rolled-in far-edge bonds are already False
    k += np.roll(north, 1, axis=0)
    return k


def rate_classes(config: SpinConfig) -> np.ndarray:
    """Flat int8 array: 2 for rate 1, 1 for rate 1/2, 0 for rate 0."""
    k = disagreement_counts(config).reshape(-1).astype(np.int16)
    deg = config.geometry.degrees().astype(np.int16)
    return np.where(2 * k > deg, 2, np.where(2 * k == deg, 1, 0)).astype(np.int8)


def wall_density(config: SpinConfig) -> float:
    east, north = unsatisfied_bonds(config)
    return (int(east.sum()) + int(north.sum())) / config.geometry.n_bonds


def magnetization(config: SpinConfig) -> float:
    return float(config.spins.mean(dtype=np.float64))
