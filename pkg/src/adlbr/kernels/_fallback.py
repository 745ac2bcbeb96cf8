"""Pure-Python stencil fields: one call to the reference routine per cell."""

import numpy as np

from adlbr import stencil
from adlbr.errors import NotSPDError, SearchBoundError


def _sym2(row):
    a, b, c = row
    return np.array([[a, b], [b, c]])


def _sym3(row):
    xx, xy, xz, yy, yz, zz = row
    return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])


def _fill(build, unpack, D, offsets, weights):
    k = weights.shape[1]
    for n in range(D.shape[0]):
        try:
            s = build(unpack(D[n]))
        except NotSPDError:
            return n
        offsets[n] = s.offsets[:k]
        weights[n] = s.weights[:k]
    return -1


def adlbr_2d(D, offsets, weights):
    return _fill(stencil.adlbr_stencil_2d, _sym2, D, offsets, weights)


def adlbr_3d(D, offsets, weights):
    return _fill(stencil.adlbr_stencil_3d, _sym3, D, offsets, weights)


def ann_2d(D, offsets, weights, max_search):
    for n in range(D.shape[0]):
        try:
            s = stencil.ann_stencil_2d(_sym2(D[n]), max_search)
        except NotSPDError:
            return n
        except SearchBoundError:
            return -(n + 2)
        offsets[n] = s.offsets[:3]
        weights[n] = s.weights[:3]
    return -1
