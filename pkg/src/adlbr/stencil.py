"""Non-negative stencils for the anisotropic diffusion energy.

A stencil is a symmetric set of integer offsets with non-negative weights
``gamma`` such that ``sum_e gamma(e) e e^T = D``.  Plugging it into the sum
of squared differences ``sum_e gamma(e) |u(z+e) - u(z)|^2`` yields a
consistent, non-negative discretization of ``int ||grad u||_D^2``.

Operator coefficients follow the convention of the assembled matrix of
``-div(D grad)`` at unit spacing: each off-center entry is ``-2 gamma(e)``
and the center is ``2 sum_e gamma(e)``.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar

from adlbr import lattice
from adlbr.errors import SearchBoundError

ANN_MAX_SEARCH = 10**6


@dataclass(frozen=True)
class Stencil:
    """Symmetric stencil: all offsets (both signs) and their weights."""

    offsets: np.ndarray  # (k, d) int
    weights: np.ndarray  # (k,) float, >= 0

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=float)
        if offsets.ndim != 2 or weights.shape != (offsets.shape[0],):
            raise ValueError("offsets must be (k, d) and weights (k,)")
        offsets.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_half(cls, half_offsets, half_weights):
        """Build the symmetric stencil from one representative per +/- pair."""
        half_offsets = np.asarray(half_offsets, dtype=np.int64)
        half_weights = np.asarray(half_weights, dtype=float)
        return cls(
            np.concatenate([half_offsets, -half_offsets]),
            np.concatenate([half_weights, half_weights]),
        )

    @property
    def dim(self):
        return self.offsets.shape[1]

    @property
    def support(self):
        """Offsets carrying a strictly positive weight."""
        return self.offsets[self.weights > 0]

    def cardinality(self):
        return int(np.count_nonzero(self.weights > 0))

    def as_dict(self, drop_zero=True):
        """Weight function as ``{offset tuple: weight}``."""
        out = {}
        for e, w in zip(self.offsets, self.weights):
            if drop_zero and w == 0:
                continue
            out[tuple(int(x) for x in e)] = out.get(tuple(int(x) for x in e), 0.0) + float(w)
        return out

    def tensor(self):
        """sum_e gamma(e) e e^T."""
        E = self.offsets.astype(float)
        return np.einsum("k,ki,kj->ij", self.weights, E, E)

    def center_coefficient(self):
        return 2.0 * float(self.weights.sum())

    def operator_coefficients(self):
        """Off-center operator entries ``-2 gamma(e)`` keyed by offset."""
        return {e: -2.0 * w for e, w in self.as_dict(drop_zero=False).items()}


def _perp(u):
    return (-u[1], u[0])


def _clamp(w):
    """Clamp roundoff below zero (and -0.0) to 0."""
    return w if w > 0 else 0.0


def _gamma2(D, superbase):
    """Weights -1/2 <e_{i+1}^perp, D e_{i+2}^perp> for a 2D superbase."""
    out = []
    for i in range(3):
        a = _perp(superbase[(i + 1) % 3])
        b = _perp(superbase[(i + 2) % 3])
        w = -0.5 * float(np.asarray(a) @ D @ np.asarray(b))
        out.append(_clamp(w))
    return out


def adlbr_metric(D):
    """Normalized metric det(D)^{1/d} D^{-1}, of unit determinant."""
    D = lattice.check_spd(D)
    d = D.shape[0]
    return np.linalg.det(D) ** (1.0 / d) * np.linalg.inv(D)


def adlbr_stencil_2d(D):
    """AD-LBR stencil of a 2x2 SPD tensor: at most six points."""
    D = lattice.check_spd(D)
    if D.shape != (2, 2):
        raise ValueError("adlbr_stencil_2d expects a 2x2 matrix")
    sb = lattice.obtuse_superbase2(adlbr_metric(D))
    return Stencil.from_half(sb, _gamma2(D, [tuple(v) for v in sb]))


def adlbr_stencil_3d(D):
    """AD-LBR stencil of a 3x3 SPD tensor: at most twelve points.

    Offsets are the cross products e_k x e_l of a D-obtuse superbase, with
    weight -1/2 <e_i, D e_j> for the complementary pair {i, j}.
    """
    D = lattice.check_spd(D)
    if D.shape != (3, 3):
        raise ValueError("adlbr_stencil_3d expects a 3x3 matrix")
    sb = lattice.obtuse_superbase3(D)
    half, weights = [], []
    for i, j in itertools.combinations(range(4), 2):
        k, l = (m for m in range(4) if m not in (i, j))
        half.append(np.cross(sb[k], sb[l]))
        weights.append(_clamp(-0.5 * float(sb[i] @ D @ sb[j])))
    return Stencil.from_half(half, weights)


def _smallest_multiple(m, num, den):
    """Smallest integer x >= 1 with num * m <= den * x."""
    x = max(1, math.ceil(m * num / den))
    while x > 1 and num * m <= den * (x - 1):
        x -= 1
    while num * m > den * x:
        x += 1
    return x


def ann_direction(a, b, c, max_search=ANN_MAX_SEARCH):
    """Extra direction (p, q) of the A-NN stencil, or None when b == 0.

    The pair minimizes max(|p|, |q|) subject to |b|/c <= |p/q| <= a/|b| and
    b p q >= 0; ties go to the smaller |p| + |q|.  The returned p is > 0.
    Each level m = max(|p|, |q|) is checked in O(1).
    """
    if b == 0:
        return None
    sign = 1 if b > 0 else -1
    ab = abs(b)
    for m in range(1, max_search + 1):
        cands = []
        q = _smallest_multiple(m, ab, a)  # p = m, need |b| p <= a q
        if q <= m and ab * q <= c * m:
            cands.append((m + q, m, q))
        p = _smallest_multiple(m, ab, c)  # q = m, need |b| q <= c p
        if p <= m and ab * p <= a * m:
            cands.append((p + m, p, m))
        if cands:
            _, p, q = min(cands)
            return p, sign * q
    raise SearchBoundError(f"A-NN direction search exceeded max(|p|,|q|) <= {max_search}")


def ann_stencil_2d(D, max_search=ANN_MAX_SEARCH):
    """Axes-directed non-negative six point stencil of a 2x2 SPD tensor."""
    D = lattice.check_spd(D)
    if D.shape != (2, 2):
        raise ValueError("ann_stencil_2d expects a 2x2 matrix")
    a, b, c = float(D[0, 0]), float(D[0, 1]), float(D[1, 1])
    pq = ann_direction(a, b, c, max_search)
    if pq is None:
        return Stencil.from_half([(1, 0), (0, 1), (1, 1)], [a / 2, c / 2, 0.0])
    p, q = pq
    w = [
        _clamp(0.5 * (a - p / q * b)),
        _clamp(0.5 * (c - q / p * b)),
        0.5 * b / (p * q),
    ]
    return Stencil.from_half([(1, 0), (0, 1), (p, q)], w)


def decomposition_residual(s, D):
    """Frobenius norm of sum_e gamma(e) e e^T - D."""
    D = np.asarray(D, dtype=float)
    if D.shape != (s.dim, s.dim):
        raise ValueError("stencil and tensor dimensions differ")
    return float(np.linalg.norm(s.tensor() - D))


def stencil_radius(s):
    """Largest Euclidean norm among offsets of positive weight."""
    support = s.support
    if support.shape[0] == 0:
        raise ValueError("empty stencil")
    return float(np.sqrt((support.astype(float) ** 2).sum(axis=1)).max())


def symbol(s, theta):
    """Fourier symbol sum_e 4 gamma(e) sin^2(<theta, e>/2) at points ``theta``.

    ``theta`` has shape (..., d).
    """
    theta = np.asarray(theta, dtype=float)
    phase = theta @ s.offsets.T.astype(float)
    return (4.0 * s.weights * np.sin(0.5 * phase) ** 2).sum(axis=-1)


def _symbol_terms(s):
    """One offset per +/- pair with the summed weight of the pair."""
    pairs = {}
    for e, w in zip(s.offsets, s.weights):
        if w <= 0:
            continue
        e = tuple(int(x) for x in e)
        nz = next(x for x in e if x != 0)
        key = e if nz > 0 else tuple(-x for x in e)
        pairs[key] = pairs.get(key, 0.0) + float(w)
    offs = np.array(list(pairs), dtype=float).reshape(-1, s.dim)
    return offs, np.array(list(pairs.values()))


def symbol_max(s, samples=512, sweeps=4):
    """Supremum of the Fourier symbol over the torus [0, 2 pi)^d.

    Dense sampling on ``samples`` points per axis, then coordinate-wise
    bounded refinement around the best sample.  This is the largest
    eigenvalue of the periodic constant-coefficient operator in the
    infinite-resolution limit.
    """
    offs, w = _symbol_terms(s)
    w = 4.0 * w
    if offs.shape[0] == 0:
        return 0.0
    d = s.dim
    t = np.arange(samples) * (2 * np.pi / samples)
    # symbol = sum_k w_k (1 - cos<theta, e_k>) / 2, evaluated via complex
    # exponentials along each axis to keep memory at samples^(d-1)
    best_val, best_theta = -np.inf, None
    if d == 2:
        phase = t[:, None, None] * offs[:, 0] + t[None, :, None] * offs[:, 1]
        vals = (0.5 * w * (1.0 - np.cos(phase))).sum(axis=-1)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        best_val, best_theta = vals[idx], np.array([t[idx[0]], t[idx[1]]])
    else:
        ey = np.exp(1j * np.outer(t, offs[:, 1]))
        ez = np.exp(1j * np.outer(t, offs[:, 2]))
        yz = ey[:, None, :] * ez[None, :, :]
        # the symbol is even, so theta_x in [0, pi] suffices
        for tx in t[: samples // 2 + 1]:
            ex = np.exp(1j * tx * offs[:, 0])
            vals = (0.5 * w * (1.0 - (yz * ex).real)).sum(axis=-1)
            j = np.unravel_index(np.argmax(vals), vals.shape)
            if vals[j] > best_val:
                best_val, best_theta = vals[j], np.array([tx, t[j[0]], t[j[1]]])

    def f(theta):
        return float((0.5 * w * (1.0 - np.cos(offs @ theta))).sum())

    step = 2 * np.pi / samples
    theta = best_theta.copy()
    for _ in range(sweeps):
        for k in range(d):
            def g(x, k=k):
                th = theta.copy()
                th[k] = x
                return -f(th)
            r = minimize_scalar(
                g, bounds=(theta[k] - step, theta[k] + step), method="bounded",
                options={"xatol": 1e-10},
            )
            if -r.fun > f(theta):
                theta[k] = r.x
    return max(float(best_val), f(theta))
