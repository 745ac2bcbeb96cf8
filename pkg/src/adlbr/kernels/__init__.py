"""Stencil fields over whole grids.

The compiled extension ``_core`` is used when it imports; otherwise, or
when ``ADLBR_PURE_PYTHON=1`` is set, the pure-Python loop in ``_fallback``
takes over.  Both fill the same arrays: one representative offset per
+/- pair (3 in 2D, 6 in 3D) and its weight.
"""

import os

import numpy as np

from adlbr.errors import NotSPDError, SearchBoundError
from adlbr.kernels import _fallback

try:
    from adlbr.kernels import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None

BACKENDS = {"python": _fallback}
if _core is not None:
    BACKENDS["compiled"] = _core

if os.environ.get("ADLBR_PURE_PYTHON", "") not in ("", "0") or _core is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"

SCHEMES = ("adlbr", "ann")


def _pack(D):
    D = np.asarray(D, dtype=float)
    d = D.shape[-1]
    flat = D.reshape(-1, d, d)
    if d == 2:
        cols = [flat[:, 0, 0], flat[:, 0, 1], flat[:, 1, 1]]
    elif d == 3:
        cols = [flat[:, 0, 0], flat[:, 0, 1], flat[:, 0, 2],
                flat[:, 1, 1], flat[:, 1, 2], flat[:, 2, 2]]
    else:
        raise ValueError("tensors must be 2x2 or 3x3")
    return np.ascontiguousarray(np.stack(cols, axis=1)), d


def stencil_field(D, scheme="adlbr", backend=None, max_search=10**6):
    """Half stencils for every tensor of ``D`` (shape (..., d, d)).

    Returns ``offsets`` of shape (N, k, d) and ``weights`` of shape (N, k),
    N being the number of tensors in row-major order.
    """
    impl = BACKENDS[backend or BACKEND]
    packed, d = _pack(D)
    N = packed.shape[0]
    scheme = scheme.lower()
    if scheme == "ann" and d != 2:
        raise ValueError("the A-NN stencil is two dimensional only")
    k = 3 if d == 2 else 6
    offsets = np.zeros((N, k, d), dtype=np.int64)
    weights = np.zeros((N, k), dtype=float)
    if scheme == "adlbr":
        bad = impl.adlbr_2d(packed, offsets, weights) if d == 2 else impl.adlbr_3d(packed, offsets, weights)
    elif scheme == "ann":
        bad = impl.ann_2d(packed, offsets, weights, max_search)
    else:
        raise ValueError(f"unknown stencil scheme {scheme!r}")
    if bad <= -2:
        raise SearchBoundError(f"A-NN direction search overflow at cell {-bad - 2}")
    if bad >= 0:
        raise NotSPDError(f"not SPD: tensor at cell {bad}")
    return offsets, weights
