"""ZTIS1 snapshot files.

A snapshot is one ASCII header line followed by the spins as row-major
packed bits (bit set means ``+1``, most significant bit first)::

    ZTIS1 <width> <height> <boundary: 0 torus, 1 free> <time> <master_seed> <stream_id>\\n

``time`` is written with ``repr`` so it parses back to the identical double.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import Boundary, ConfigError, LatticeGeometry, SpinConfig

MAGIC = "ZTIS1"
_FLAGS = {Boundary.TORUS: 0, Boundary.FREE: 1}


@dataclass(frozen=True)
class Snapshot:
    config: SpinConfig
    time: float = 0.0
    master_seed: int = 0
    stream_id: int = 0


def to_bytes(snap: Snapshot) -> bytes:
    g = snap.config.geometry
    header = (f"{MAGIC} {g.width} {g.height} {_FLAGS[g.boundary]} {float(snap.time)!r} "
              f"{int(snap.master_seed)} {int(snap.stream_id)}\n")
    bits = np.packbits(snap.config.flat > 0)
    return header.encode("ascii") + bits.tobytes()


def from_bytes(data: bytes) -> Snapshot:
    end = data.find(b"\n")
    if end < 0:
        raise ConfigError("snapshot header is not terminated")
    fields = data[:end].decode("ascii").split()
    if len(fields) != 7 or fields[0] != MAGIC:
        raise ConfigError(f"not a {MAGIC} snapshot header: {data[:end]!r}")
    width, height, flag = int(fields[1]), int(fields[2]), int(fields[3])
    if flag not in (0, 1):
        raise ConfigError(f"bad boundary flag {flag}")
    geometry = LatticeGeometry(width, height, Boundary.TORUS if flag == 0 else Boundary.FREE)
    n = geometry.n_sites
    body = np.frombuffer(data[end + 1:], dtype=np.uint8)
    if body.size != (n + 7) // 8:
        raise ConfigError(f"expected {(n + 7) // 8} bytes of spins, got {body.size}")
    bits = np.unpackbits(body, count=n)
    spins = np.where(bits == 1, 1, -1).astype(np.int8)
    return Snapshot(SpinConfig(geometry, spins), float(fields[4]), int(fields[5]), int(fields[6]))


def write_snapshot(path, snap: Snapshot) -> Path:
    path = Path(path)
    path.write_bytes(to_bytes(snap))
    return path


def read_snapshot(path) -> Snapshot:
    return from_bytes(Path(path).read_bytes())


def snapshot_name(stream_id: int, time: float) -> str:
    """Canonical file name, sortable by replica then time."""
    return f"r{stream_id:06d}_t{float(time):014.6f}.ztis"


def iter_snapshots(directory):
    """Snapshots of a directory in file-name order."""
    for p in sorted(Path(directory).glob("*.ztis")):
        yield p, read_snapshot(p)


__all__ = ["MAGIC", "Snapshot", "from_bytes", "iter_snapshots", "read_snapshot", "snapshot_name",
           "to_bytes", "write_snapshot"]
