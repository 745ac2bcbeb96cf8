"""Solution-dependent diffusion tensors: structure tensors, CED and EED maps.

Scales (``sigma``, ``rho``) are standard deviations in grid cells.  The
eigenvalue maps act on whole fields at once through a batched symmetric
eigensolver; :func:`eigen_sym` is the single-matrix reference.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import ndimage

from adlbr.operator import ScalarField, TensorField

DEGENERATE = 1e-30
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class StructureParams:
    sigma: float = 0.5
    rho: float = 4.0
    C: float = 1e-5
    alpha: float = 1e-2

    def __post_init__(self):
        if not (self.sigma >= 0 and self.rho >= 0):
            raise ValueError("sigma and rho must be non-negative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.C > 0:
            raise ValueError("C must be positive")


def gaussian_kernel(s):
    """Sampled Gaussian of standard deviation ``s``, radius ceil(3 s), unit sum."""
    r = int(math.ceil(3 * s))
    x = np.arange(-r, r + 1, dtype=float)
    k = np.exp(-0.5 * (x / s) ** 2)
    return k / k.sum()


def _blur(a, s, axes):
    if s == 0:
        return a.copy()
    k = gaussian_kernel(s)
    for ax in axes:
        a = ndimage.correlate1d(a, k, axis=ax, mode="reflect")
    return a


def gaussian_blur(u, s):
    """Separable Gaussian blur with reflecting boundary; ``s = 0`` is the identity."""
    if s < 0:
        raise ValueError("blur scale must be non-negative")
    return u.replace(_blur(u.values, s, range(u.dim)))


def gradient(u):
    """Central differences (u[i+1] - u[i-1]) / 2h, reflecting at the boundary.

    Returns an array of shape (*grid, d).
    """
    a = u.values
    p = np.pad(a, 1, mode="symmetric")
    core = tuple(slice(1, -1) for _ in range(u.dim))
    out = []
    for ax in range(u.dim):
        hi = list(core)
        lo = list(core)
        hi[ax] = slice(2, None)
        lo[ax] = slice(None, -2)
        out.append((p[tuple(hi)] - p[tuple(lo)]) / (2 * u.h))
    return np.stack(out, axis=-1)


def structure_tensor(u, p):
    """J_rho = K_rho * (grad u_sigma grad u_sigma^T), one tensor per cell."""
    g = gradient(gaussian_blur(u, p.sigma))
    J = g[..., :, None] * g[..., None, :]
    J = _blur(J, p.rho, range(u.dim))
    J = 0.5 * (J + np.swapaxes(J, -1, -2))
    return TensorField(J, u.h, u.boundary)


def eigen_sym(m, tol=1e-12, max_sweeps=50):
    """Eigenvalues (descending) and orthonormal eigenvectors (columns).

    Closed form for 2x2, cyclic Jacobi rotations for 3x3.
    """
    m = np.asarray(m, dtype=float)
    if m.shape == (2, 2):
        a, b, c = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
        mean = 0.5 * (a + c)
        r = math.hypot(0.5 * (a - c), b)
        phi = 0.5 * math.atan2(2 * b, a - c)
        V = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
        return np.array([mean + r, mean - r]), V
    if m.shape != (3, 3):
        raise ValueError("eigen_sym expects a 2x2 or 3x3 matrix")
    A = 0.5 * (m + m.T)
    V = np.eye(3)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = math.sqrt(A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2)
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if A[p, q] == 0:
                continue
            theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
            c = 1 / math.sqrt(t * t + 1)
            s = t * c
            R = np.eye(3)
            R[p, p] = R[q, q] = c
            R[p, q], R[q, p] = s, -s
            A = R.T @ A @ R
            V = V @ R
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def _eig_field(J):
    """Descending eigenvalues (..., d) and eigenvectors (..., d, d) of a field."""
    w, V = np.linalg.eigh(J)
    return w[..., ::-1], V[..., ::-1]


def _checked_spectrum(t):
    mu, V = _eig_field(t.values)
    trace = np.trace(t.values, axis1=-2, axis2=-1)
    bound = -PSD_RTOL * np.maximum(np.abs(trace), np.finfo(float).tiny)
    if np.any(mu[..., -1] < bound):
        raise ValueError("structure tensor is not positive semi-definite")
    return np.maximum(mu, 0.0), V


def _rebuild(t, lam, V):
    D = np.einsum("...ik,...k,...jk->...ij", V, lam, V)
    D = 0.5 * (D + np.swapaxes(D, -1, -2))
    return TensorField(D, t.h, t.boundary)


def _coherence(diff, C):
    """exp(-C / diff^2), taken as 0 when the eigenvalues coincide."""
    d2 = diff * diff
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        return np.where(d2 < DEGENERATE, 0.0, np.exp(-C / np.where(d2 < DEGENERATE, 1.0, d2)))


def ced_tensor(J, p):
    """Coherence-enhancing map: eigenvalue alpha along the dominant
    direction, alpha + (1 - alpha) exp(-C / (mu_1 - mu_i)^2) along the others.
    """
    mu, V = _checked_spectrum(J)
    lam = np.empty_like(mu)
    lam[..., 0] = p.alpha
    for i in range(1, mu.shape[-1]):
        lam[..., i] = p.alpha + (1 - p.alpha) * _coherence(mu[..., 0] - mu[..., i], p.C)
    return _rebuild(J, lam, V)


def eed_tensor(J, p):
    """Edge-enhancing map: 1 - exp(-C / mu_i^2) for all but the last axis, which gets 1."""
    mu, V = _checked_spectrum(J)
    lam = np.ones_like(mu)
    for i in range(mu.shape[-1] - 1):
        m2 = mu[..., i] ** 2
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            val = -np.expm1(-p.C / np.where(m2 < DEGENERATE, 1.0, m2))
        lam[..., i] = np.where(m2 < DEGENERATE, 1.0, val)
    return _rebuild(J, lam, V)


def condition_numbers(t):
    """Anisotropy ratio sqrt(lambda_max / lambda_min) of every tensor."""
    w = np.linalg.eigvalsh(t.values)
    return np.sqrt(w[..., -1] / w[..., 0])
