"""Lattice basis reduction and obtuse superbases of Z^2 and Z^3.

All routines take a symmetric positive-definite form ``M`` (any array-like of
shape (d, d)) and work with integer vectors.  Bases and superbases are
returned as integer arrays whose *rows* are the lattice vectors.

Small vectors are handled with plain Python tuples: for 2- and 3-vectors
the numpy call overhead dominates the arithmetic by a wide margin.
"""

import itertools
import math

import numpy as np

from adlbr.errors import NotSPDError

SPD_RTOL = 1e-12


def round_half_away(x):
    """Nearest integer, ties rounded away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def as_symmetric(M):
    """Return ``M`` as a float (d, d) array, d in {2, 3}, symmetrized."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] not in (2, 3):
        raise ValueError(f"expected a 2x2 or 3x3 matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14 * np.abs(M).max()):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def check_spd(M):
    """Validate positive-definiteness via leading principal minors.

    Minors are compared against ``SPD_RTOL`` times the matching power of the
    largest entry, so a near-singular form is rejected rather than reduced.
    """
    M = as_symmetric(M)
    d = M.shape[0]
    scale = float(np.abs(M).max())
    if not np.isfinite(scale) or scale == 0.0:
        raise NotSPDError("not SPD: zero or non-finite matrix")
    for k in range(1, d + 1):
        minor = float(np.linalg.det(M[:k, :k]))
        if not minor > SPD_RTOL * scale**k:
            raise NotSPDError(f"not SPD: leading minor {k} is {minor:.3e}")
    return M


def anisotropy(M):
    """Anisotropy ratio sqrt(||M|| ||M^-1||) of an SPD matrix."""
    w = np.linalg.eigvalsh(np.asarray(M, dtype=float))
    return math.sqrt(w[-1] / w[0])


def _dot(M, u, v):
    return sum(M[i][j] * u[i] * v[j] for i in range(len(u)) for j in range(len(v)))


def _sub(u, k, v):
    return tuple(a - k * b for a, b in zip(u, v))


def _lagrange_pair(e, f, M, max_iter=10_000):
    """Lagrange's loop on the rank-2 lattice spanned by ``e`` and ``f``.

    Returns ``(e, f, iterations)`` with ||e||_M <= ||f||_M.
    """
    ne = _dot(M, e, e)
    nf = _dot(M, f, f)
    it = 0
    while True:
        k = round_half_away(_dot(M, e, f) / nf)
        e, f = f, _sub(e, k, f)
        ne, nf = nf, _dot(M, f, f)
        it += 1
        if not ne > nf:
            return e, f, it
        if it >= max_iter:  # pragma: no cover - impossible for SPD input
            raise RuntimeError("Lagrange reduction did not terminate")


def _lagrange(M):
    M = check_spd(M)
    if M.shape != (2, 2):
        raise ValueError("lagrange_reduce expects a 2x2 matrix")
    return _lagrange_pair((1, 0), (0, 1), M.tolist())


def lagrange_reduce(M):
    """M-reduced basis (e, f) of Z^2, ||e||_M <= ||f||_M.

    Starts from the canonical basis and iterates
    ``(e, f) <- (f, e - Round(<e, M f> / ||f||^2) f)`` while ||e|| > ||f||.

    Raises
    ------
    NotSPDError
        If ``M`` is not positive-definite.
    """
    e, f, _ = _lagrange(M)
    return np.array([e, f], dtype=np.int64)


def lagrange_iterations(M):
    """Number of loop iterations :func:`lagrange_reduce` performs on ``M``."""
    return _lagrange(M)[2]


def _closest_in_plane(b0, b1, t, M):
    """Vector ``t - k0 b0 - k1 b1`` of least M-norm.

    Searched over the 3x3 rounding neighbourhood of the real least-squares
    coefficients; exact when (b0, b1) is Lagrange-reduced.
    """
    g00 = _dot(M, b0, b0)
    g01 = _dot(M, b0, b1)
    g11 = _dot(M, b1, b1)
    r0 = _dot(M, b0, t)
    r1 = _dot(M, b1, t)
    det = g00 * g11 - g01 * g01
    x0 = (g11 * r0 - g01 * r1) / det
    x1 = (g00 * r1 - g01 * r0) / det
    k0c = round_half_away(x0)
    k1c = round_half_away(x1)
    best = t
    best_n = _dot(M, t, t)
    for k0 in (k0c - 1, k0c, k0c + 1):
        for k1 in (k1c - 1, k1c, k1c + 1):
            c = tuple(ti - k0 * u - k1 * v for ti, u, v in zip(t, b0, b1))
            n = _dot(M, c, c)
            if n < best_n * (1.0 - 1e-12):
                best, best_n = c, n
    return best


def _reduce3(M):
    B = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    for _ in range(10_000):
        B.sort(key=lambda v: _dot(M, v, v))
        b0, b1, _ = _lagrange_pair(B[0], B[1], M)
        b2 = _closest_in_plane(b0, b1, B[2], M)
        if b2 == B[2]:
            B = [b0, b1, b2]
            B.sort(key=lambda v: _dot(M, v, v))
            return B
        B = [b0, b1, b2]
    raise RuntimeError("greedy reduction did not terminate")  # pragma: no cover


def reduce3(M):
    """Minkowski-reduced basis of Z^3 for the form ``M``.

    Greedy scheme: sort by norm, Lagrange-reduce the two shortest vectors,
    replace the longest by its distance vector to their span, repeat until
    no norm decreases.  Every step is unimodular.
    """
    M = check_spd(M)
    if M.shape != (3, 3):
        raise ValueError("reduce3 expects a 3x3 matrix")
    return np.array(_reduce3(M.tolist()), dtype=np.int64)


def reduced_basis(M):
    """Dispatch to :func:`lagrange_reduce` or :func:`reduce3` by dimension."""
    M = check_spd(M)
    return lagrange_reduce(M) if M.shape[0] == 2 else reduce3(M)


def minkowski_minima(M):
    """Successive minima (lambda_1, ..., lambda_d) of the norm ||.||_M on Z^d."""
    M = check_spd(M)
    B = reduced_basis(M)
    return tuple(sorted(math.sqrt(float(b @ M @ b)) for b in B))


def mu(M):
    """|<e, M f>| for an M-reduced basis (e, f) of Z^2."""
    M = check_spd(M)
    e, f = lagrange_reduce(M)
    return abs(float(e @ M @ f))


def obtuse_superbase2(M):
    """M-obtuse superbase (e, f, g) of Z^2 with e + f + g = 0."""
    M = check_spd(M)
    e, f, _ = _lagrange_pair((1, 0), (0, 1), M.tolist())
    if _dot(M.tolist(), e, f) > 0:
        f = (-f[0], -f[1])
    g = (-e[0] - f[0], -e[1] - f[1])
    return np.array([e, f, g], dtype=np.int64)


def _signed_order(B, D):
    """Permute and sign a reduced basis so that |<b1,Db2>| <= -<b1,Db3>, -<b2,Db3>.

    Permutations are tried in lexicographic order; the first one whose
    absolute products are nondecreasing (12 <= 13 <= 23) wins.
    """
    for p in itertools.permutations(range(3)):
        b1, b2, b3 = (B[i] for i in p)
        s12 = abs(_dot(D, b1, b2))
        s13 = abs(_dot(D, b1, b3))
        s23 = abs(_dot(D, b2, b3))
        if s12 <= s13 <= s23:
            break
    if _dot(D, b1, b3) > 0:
        b1 = tuple(-x for x in b1)
    if _dot(D, b2, b3) > 0:
        b2 = tuple(-x for x in b2)
    return b1, b2, b3


def _superbase3(D):
    b1, b2, b3 = _signed_order(_reduce3(D), D)
    if _dot(D, b1, b2) <= 0:
        e0 = tuple(-(x + y + z) for x, y, z in zip(b1, b2, b3))
        return [b1, b2, b3, e0]
    return [
        tuple(-x for x in b1),
        b2,
        tuple(x + z for x, z in zip(b1, b3)),
        tuple(-(y + z) for y, z in zip(b2, b3)),
    ]


def obtuse_superbase3(D):
    """D-obtuse superbase (e0, e1, e2, e3) of Z^3.

    Built from a D-reduced basis after signing/permuting it; the two cases
    depend on the sign of <b1, D b2>.
    """
    D = check_spd(D)
    if D.shape != (3, 3):
        raise ValueError("obtuse_superbase3 expects a 3x3 matrix")
    return np.array(_superbase3(D.tolist()), dtype=np.int64)
