"""Backend selection for the pairwise squared-distance kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback. Set ``SAMPLED_CBF_PURE_PYTHON=1`` to force the fallback.

All functions take C-contiguous float64 arrays of shape ``(n, k)``.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SAMPLED_CBF_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def backends():
    """Available backend modules keyed by name (for benchmarks and cross-checks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return out


def as_points(a):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


def min_pair(body, obstacles, shift):
    """Minimum of ``||body[i] + shift - obstacles[j]||^2`` and its first minimizing ``(i, j)``."""
    return _impl.min_pair(body, obstacles, np.ascontiguousarray(shift, dtype=np.float64))


def pairs_within(body, obstacles, shift, bound):
    """All ``(i, j, sq)`` with ``sq <= bound``, in row-major order."""
    return _impl.pairs_within(body, obstacles, np.ascontiguousarray(shift, dtype=np.float64), float(bound))


def nearest_sq(queries, points):
    return _impl.nearest_sq(queries, points)


# relative slack on the culling bounds; covers rounding in sqrt and squaring
_CULL_SLACK = 1e-9


def active_pairs(body, obstacles, shift, tolerance, body_radius=None):
    """Minimum squared distance and every pair within ``tolerance`` of it.

    Obstacle samples that cannot come within ``tolerance`` of the minimum
    are culled first: with ``R`` bounding ``||body[i]||``, a sample at
    distance ``c`` from ``shift`` has all its pairs at or beyond
    ``(c - R)^2``, and some pair sits at or below ``(min c + R)^2``. The
    survivors are scanned exhaustively in their original order, so the
    output equals ``pairs_within`` on the full set.

    Returns ``(best, I, J, SQ)``.
    """
    if body_radius is None:
        body_radius = float(np.sqrt(np.max(np.sum(body * body, axis=1))))
    shift = np.ascontiguousarray(shift, dtype=np.float64)
    return _impl.active_pairs(body, obstacles, shift, float(tolerance), float(body_radius), _CULL_SLACK)
