"""Constant-sign clusters, their radii around a site, and wrapping.

Labelling is union-find over nearest-neighbour bonds with a displacement
vector carried on every parent link. Closing a cycle whose accumulated
displacement is nonzero means the cluster wraps the torus in that direction;
this is the finite-lattice stand-in for an infinite (percolating) cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .lattice import Boundary, SpinConfig, disagreement_counts


@dataclass(frozen=True, eq=False)
class ClusterMap:
    """Cluster decomposition of one configuration.

    ``labels[y, x]`` is the smallest flat index of the cluster containing
    ``(x, y)``; ``ux``/``uy`` are unwrapped coordinates in the cluster's own
    frame, so extents are meaningful across the periodic seams.
    """

    config: SpinConfig
    labels: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    boundary_mask: np.ndarray
    cluster_ids: np.ndarray
    sizes: np.ndarray
    signs: np.ndarray
    wraps_x: np.ndarray
    wraps_y: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_ids.size)

    def _row(self, label: int) -> int:
        return int(np.searchsorted(self.cluster_ids, label))

    def label_of(self, site) -> int:
        x, y = self.config.geometry.check_site(site)
        return int(self.labels[y, x])

    def size_of(self, site) -> int:
        return int(self.sizes[self._row(self.label_of(site))])

    def inner_boundary(self, label: int) -> list[tuple[int, int]]:
        ys, xs = np.nonzero((self.labels == label) & self.boundary_mask)
        return list(zip(xs.tolist(), ys.tolist()))

    def extent(self, label: int) -> tuple[int, int]:
        """Unwrapped width and height of a cluster (in lattice spacings)."""
        m = self.labels == label
        return (int(self.ux[m].max() - self.ux[m].min()), int(self.uy[m].max() - self.uy[m].min()))

    def wraps(self, label: int) -> tuple[bool, bool]:
        row = self._row(label)
        return bool(self.wraps_x[row]), bool(self.wraps_y[row])


def inner_boundary_mask(config: SpinConfig) -> np.ndarray:
    """Sites with at least one (in-lattice) neighbour of opposite sign."""
    return disagreement_counts(config) > 0


def label_clusters(config: SpinConfig) -> ClusterMap:
    g = config.geometry
    nbr = g.neighbor_table()
    labels, ux, uy, fx, fy = kernels.label_clusters(config.flat, nbr.reshape(-1), g.width, g.height)
    shape = (g.height, g.width)
    labels = np.asarray(labels, dtype=np.int32).reshape(shape)
    ux = np.asarray(ux, dtype=np.int32).reshape(shape)
    uy = np.asarray(uy, dtype=np.int32).reshape(shape)
    ids, first, sizes = np.unique(labels, return_index=True, return_counts=True)
    fx = np.asarray(fx, dtype=bool).reshape(-1)[first]
    fy = np.asarray(fy, dtype=bool).reshape(-1)[first]
    return ClusterMap(
        config=config,
        labels=labels,
        ux=ux,
        uy=uy,
        boundary_mask=inner_boundary_mask(config),
        cluster_ids=ids,
        sizes=sizes,
        signs=config.flat[ids].astype(np.int8),
        wraps_x=fx,
        wraps_y=fy,
    )


def _distances(cmap: ClusterMap, site, sites: np.ndarray) -> np.ndarray:
    g = cmap.config.geometry
    x0, y0 = g.check_site(site)
    dx = np.abs(sites[:, 0] - x0)
    dy = np.abs(sites[:, 1] - y0)
    if g.boundary is Boundary.TORUS:
        dx = np.minimum(dx, g.width - dx)
        dy = np.minimum(dy, g.height - dy)
    return np.hypot(dx, dy)


def _boundary_distances(cmap: ClusterMap, site) -> np.ndarray | None:
    label = cmap.label_of(site)
    ys, xs = np.nonzero((cmap.labels == label) & cmap.boundary_mask)
    if xs.size == 0:
        return None
    return _distances(cmap, site, np.column_stack([xs, ys]))


def r_star_min(cmap: ClusterMap, config: SpinConfig, site) -> float | None:
    """Distance from ``site`` to the nearest inner-boundary site of its cluster.

    Returns None when the cluster has no inner boundary (constant torus).
    """
    d = _boundary_distances(cmap, site)
    return None if d is None else float(d.min())


def r_star_max(cmap: ClusterMap, config: SpinConfig, site) -> float | None:
    """Distance from ``site`` to the farthest inner-boundary site of its cluster."""
    d = _boundary_distances(cmap, site)
    return None if d is None else float(d.max())


def wrapping_report(cmap: ClusterMap) -> dict:
    """Which clusters wrap the torus, or span a FREE lattice.

    On a FREE lattice wrapping is impossible; a cluster is reported when it
    touches both opposite edges and ``mode`` is ``"crossing"``.
    """
    g = cmap.config.geometry
    if g.boundary is Boundary.TORUS:
        fx, fy = cmap.wraps_x, cmap.wraps_y
        mode = "wrapping"
    else:
        lab = cmap.labels
        left, right = set(lab[:, 0].tolist()), set(lab[:, -1].tolist())
        bottom, top = set(lab[0, :].tolist()), set(lab[-1, :].tolist())
        fx = np.array([c in left and c in right for c in cmap.cluster_ids.tolist()], dtype=bool)
        fy = np.array([c in bottom and c in top for c in cmap.cluster_ids.tolist()], dtype=bool)
        mode = "crossing"
    any_dir = fx | fy
    return {
        "mode": mode,
        "any_wraps": bool(any_dir.any()),
        "x": {"+": int((fx & (cmap.signs > 0)).sum()), "-": int((fx & (cmap.signs < 0)).sum())},
        "y": {"+": int((fy & (cmap.signs > 0)).sum()), "-": int((fy & (cmap.signs < 0)).sum())},
        "any": {"+": int((any_dir & (cmap.signs > 0)).sum()), "-": int((any_dir & (cmap.signs < 0)).sum())},
    }


def snapshot_summary(config: SpinConfig, site=None) -> dict:
    """Per-snapshot cluster observables around ``site`` (default: the origin).

    Radii are set to None when the cluster of ``site`` wraps or its unwrapped
    extent reaches half the lattice, where torus radii stop matching the
    infinite-lattice ones.
    """
    g = config.geometry
    site = g.origin if site is None else site
    cmap = label_clusters(config)
    label = cmap.label_of(site)
    wx, wy = cmap.wraps(label)
    ex, ey = cmap.extent(label)
    too_big = wx or wy or ex >= g.width / 2 or ey >= g.height / 2
    rmin = rmax = None
    if not too_big:
        rmin = r_star_min(cmap, config, site)
        rmax = r_star_max(cmap, config, site)
    report = wrapping_report(cmap)
    return {
        "n_clusters": cmap.n_clusters,
        "max_cluster": int(cmap.sizes.max()),
        "origin_cluster": cmap.size_of(site),
        "r_star_min": rmin,
        "r_star_max": rmax,
        "radius_excluded": bool(too_big),
        "wraps": report["any_wraps"],
    }
