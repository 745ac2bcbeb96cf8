"""Analytic restoration test case: a transported two-tone stripe.

The stripe ``1_{y < 1/2}`` is pulled back by ``f(x, y) = (x, y + a cos 2 pi x)``
and so is the diffusion tensor ``diag(1, kappa^-2)``, giving

    D(x, y) = [[1, s], [s, s^2 + kappa^-2]],   s = 2 pi a sin(2 pi x).

In the straightened coordinates the screened problem
``u - lam div(D grad u) = v`` reduces to a one-dimensional equation in y
with decay length ``ell = sqrt(lam) / kappa``, whose whole-line solution is
used as the reference.
"""

from dataclasses import dataclass
import math
import time

import numpy as np

from adlbr.operator import Boundary, ScalarField, Scheme, TensorField, assemble, cg_solve

CG_TOL = 1e-10


@dataclass(frozen=True)
class SyntheticCase:
    kappa: float
    n: int
    alpha: float = 1.0 / 3.0
    lam: float = 1e-3

    def __post_init__(self):
        if not self.kappa >= 1:
            raise ValueError("kappa must be >= 1")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.n < 8:
            raise ValueError("n must be at least 8")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def decay_length(self):
        return math.sqrt(self.lam) / self.kappa


def _centers(c):
    x = (np.arange(c.n) + 0.5) / c.n
    return np.meshgrid(x, x, indexing="ij")


def _straightened_y(c):
    X, Y = _centers(c)
    return X, Y + c.alpha * np.cos(2 * np.pi * X)


def make_inputs(c):
    """Sampled stripe image and tensor field at cell centres, reflecting boundary."""
    X, Yf = _straightened_y(c)
    v = (Yf < 0.5).astype(float)
    s = 2 * np.pi * c.alpha * np.sin(2 * np.pi * X)
    D = np.empty(X.shape + (2, 2))
    D[..., 0, 0] = 1.0
    D[..., 0, 1] = D[..., 1, 0] = s
    D[..., 1, 1] = s * s + c.kappa**-2
    return ScalarField(v, c.h, Boundary.NEUMANN), TensorField(D, c.h, Boundary.NEUMANN)


def profile(y, ell):
    """Whole-line solution of u - ell^2 u'' = 1_{y < 1/2}."""
    y = np.asarray(y, dtype=float)
    z = (y - 0.5) / ell
    below = 1.0 - 0.5 * np.exp(np.minimum(z, 0.0))
    above = 0.5 * np.exp(-np.maximum(z, 0.0))
    return np.where(y <= 0.5, below, above)


def reference_solution(c):
    _, Yf = _straightened_y(c)
    return ScalarField(profile(Yf, c.decay_length), c.h, Boundary.NEUMANN)


def _forward_diffs(a):
    return [np.diff(a, axis=k) for k in range(a.ndim)]


def error_norms(u_num, u_ref):
    """Relative L2 error and relative H1 seminorm error over cells.

    The seminorm sums squared forward differences of interior pairs; both
    norms are unweighted, so grid spacing cancels in the ratios.
    """
    if u_num.shape != u_ref.shape:
        raise ValueError("grids differ")
    diff = u_num.values - u_ref.values
    l2 = np.linalg.norm(diff) / np.linalg.norm(u_ref.values)
    num = math.sqrt(sum(float((g * g).sum()) for g in _forward_diffs(diff)))
    den = math.sqrt(sum(float((g * g).sum()) for g in _forward_diffs(u_ref.values)))
    return float(l2), num / den


@dataclass(frozen=True)
class BenchmarkResult:
    scheme: str
    kappa: float
    n: int
    l2_rel: float
    h1_rel: float
    wall_ms: float


def run_benchmark(c, scheme=Scheme.ADLBR, jacobi=False):
    """Assemble, solve (I + lam A) u = v by CG and compare with the reference."""
    scheme = Scheme(scheme)
    start = time.perf_counter()
    v, t = make_inputs(c)
    A = assemble(t, scheme)
    u = cg_solve(A, c.lam, v, tol=CG_TOL, jacobi=jacobi)
    wall_ms = 1e3 * (time.perf_counter() - start)
    l2, h1 = error_norms(u, reference_solution(c))
    return BenchmarkResult(scheme.value, c.kappa, c.n, l2, h1, wall_ms)
