"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
kernels take over. Setting ``ZTISING_PURE=1`` forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("ZTISING_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

advance = _impl.advance
label_clusters = _impl.label_clusters

NAIVE = _pykernels.NAIVE
KMC = _pykernels.KMC
REACHED = _pykernels.REACHED
MAX_EVENTS = _pykernels.MAX_EVENTS
ABSORBED = _pykernels.ABSORBED
WATCH = _pykernels.WATCH

N1, NH, UNSAT, CORNERS, CORNER_VERTICES, EVENTS, FLIPS = range(7)


def backends():
    """Mapping of available backend name to kernel module."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:  # pragma: no cover
        pass
    else:
        out["compiled"] = _ckernels
    return out
