"""Grid fields, assembly of discrete -div(D grad), and linear algebra on it.

Conventions
-----------
* Array axis ``k`` of a field is coordinate ``k`` of every stencil offset.
* Cell ``i`` sits at ``(i + 1/2) h`` along each axis.
* The assembled matrix ``A`` is that of the quadratic form ``h^-d E_h``, so
  for stencil schemes ``u^T A u = h^-2 sum_z sum_e gamma_z(e) |u(z+e) - u(z)|^2``
  and constant-tensor entries do not depend on ``h`` beyond ``h^-2``.
"""

from dataclasses import dataclass
import enum

import numpy as np
import scipy.io
import scipy.sparse as sp

from adlbr import kernels
from adlbr.errors import ConvergenceError

STALL_RTOL = 1e-3


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    NEUMANN = "neumann"


class Scheme(str, enum.Enum):
    ADLBR = "adlbr"
    ANN = "ann"
    FD = "fd"


@dataclass(frozen=True)
class ScalarField:
    """Samples of a scalar function on a 2D or 3D Cartesian grid."""

    values: np.ndarray
    h: float = 1.0
    boundary: Boundary = Boundary.NEUMANN

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim not in (2, 3):
            raise ValueError("fields are two or three dimensional")
        if min(values.shape) < 1:
            raise ValueError("empty field")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dim(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    def replace(self, values):
        return ScalarField(np.asarray(values, dtype=float).reshape(self.shape), self.h, self.boundary)


@dataclass(frozen=True)
class TensorField:
    """One symmetric d x d tensor per cell; ``values`` has shape (*grid, d, d)."""

    values: np.ndarray
    h: float = 1.0
    boundary: Boundary = Boundary.NEUMANN

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        d = values.ndim - 2
        if d not in (2, 3) or values.shape[-2:] != (d, d):
            raise ValueError(f"tensor field shape {values.shape} is not (*grid, d, d)")
        if not np.allclose(values, np.swapaxes(values, -1, -2)):
            raise ValueError("tensor field is not symmetric")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @classmethod
    def constant(cls, D, shape, h=1.0, boundary=Boundary.PERIODIC):
        D = np.asarray(D, dtype=float)
        return cls(np.broadcast_to(D, tuple(shape) + D.shape).copy(), h, boundary)

    @property
    def dim(self):
        return self.values.ndim - 2

    @property
    def shape(self):
        return self.values.shape[:-2]


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric sparse matrix of a discrete -div(D grad) on a grid."""

    matrix: sp.csr_matrix
    shape: tuple
    h: float
    boundary: Boundary
    scheme: Scheme

    @property
    def size(self):
        return self.matrix.shape[0]

    def apply(self, u):
        """A u for a flat array, a grid-shaped array, or a ScalarField."""
        if isinstance(u, ScalarField):
            return u.replace(self.matrix @ u.values.ravel())
        u = np.asarray(u, dtype=float)
        return (self.matrix @ u.ravel()).reshape(u.shape)

    def diagonal(self):
        return self.matrix.diagonal()

    def write_matrix_market(self, path):
        scipy.io.mmwrite(
            str(path), self.matrix,
            comment=f"scheme={self.scheme.value} shape={self.shape} h={self.h} boundary={self.boundary.value}",
            symmetry="symmetric",
        )


def _cell_coords(shape):
    return np.indices(shape).reshape(len(shape), -1).T


def _arms(shape, boundary, offsets):
    """Neighbour flat indices for each cell along ``offsets`` (N, d), and validity."""
    shape_arr = np.asarray(shape)
    nb = _cell_coords(shape) + offsets
    if boundary == Boundary.PERIODIC:
        nb %= shape_arr
        valid = np.ones(nb.shape[0], dtype=bool)
    else:
        valid = np.all((nb >= 0) & (nb < shape_arr), axis=1)
        nb = np.where(valid[:, None], nb, 0)
    return np.ravel_multi_index(tuple(nb.T), shape), valid


def stencil_arms(t, scheme):
    """Yield ``(z, z', gamma)`` for every admissible arm of every cell stencil."""
    offsets, weights = kernels.stencil_field(t.values, scheme.value)
    z = np.arange(weights.shape[0])
    for k in range(weights.shape[1]):
        for sign in (1, -1):
            nb, valid = _arms(t.shape, t.boundary, sign * offsets[:, k, :])
            valid &= weights[:, k] > 0
            yield z[valid], nb[valid], weights[valid, k]


def _pair_entries(p, q, w):
    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    vals = np.concatenate([w, w, -w, -w])
    return rows, cols, vals


def _assemble_stencil(t, scheme):
    parts = [_pair_entries(p, q, w) for p, q, w in stencil_arms(t, scheme)]
    rows, cols, vals = (np.concatenate(x) for x in zip(*parts))
    return rows, cols, vals


# sum of ax ay^T + ay ax^T over cells (c00, c10, c01, c11), where ax and ay
# are the node-averaged x and y differences
_AX = 0.5 * np.array([-1.0, 1.0, -1.0, 1.0])
_AY = 0.5 * np.array([-1.0, -1.0, 1.0, 1.0])
_CROSS = np.outer(_AX, _AY) + np.outer(_AY, _AX)


def _fd_nodes(D, boundary):
    """Node tensors: periodic node (a, b) sits at (a + 1/2, b + 1/2), Neumann at (a - 1/2, b - 1/2)."""
    if boundary == Boundary.PERIODIC:
        nodes = 0.25 * (D + np.roll(D, -1, 0) + np.roll(D, -1, 1) + np.roll(D, (-1, -1), (0, 1)))
        return nodes
    # reflected ghost cells; the off-diagonal entry changes sign across a mirror
    P = np.pad(D, ((1, 1), (1, 1), (0, 0), (0, 0)), mode="symmetric")
    P[[0, -1], :, 0, 1] *= -1
    P[:, [0, -1], 0, 1] *= -1
    P[..., 1, 0] = P[..., 0, 1]
    nodes = 0.25 * (P[:-1, :-1] + P[1:, :-1] + P[:-1, 1:] + P[1:, 1:])
    return nodes


def _assemble_fd(t):
    if t.dim != 2:
        raise ValueError("the FD scheme is two dimensional only")
    n0, n1 = t.shape
    idx = np.arange(n0 * n1).reshape(n0, n1)
    nodes = _fd_nodes(t.values, t.boundary)
    periodic = t.boundary == Boundary.PERIODIC
    parts = []
    if periodic:
        p, q = idx, np.roll(idx, -1, 0)
        w = 0.5 * (nodes[..., 0, 0] + np.roll(nodes[..., 0, 0], 1, 1))
        parts.append(_pair_entries(p.ravel(), q.ravel(), w.ravel()))
        p, q = idx, np.roll(idx, -1, 1)
        w = 0.5 * (nodes[..., 1, 1] + np.roll(nodes[..., 1, 1], 1, 0))
        parts.append(_pair_entries(p.ravel(), q.ravel(), w.ravel()))
        c00, c10 = idx, np.roll(idx, -1, 0)
        c01, c11 = np.roll(idx, -1, 1), np.roll(idx, (-1, -1), (0, 1))
        beta = nodes[..., 0, 1]
    else:
        # x-edges between cells (i, j), (i+1, j): nodes (i+1, j+1) and (i+1, j)
        w = 0.5 * (nodes[1:-1, 1:, 0, 0] + nodes[1:-1, :-1, 0, 0])
        parts.append(_pair_entries(idx[:-1].ravel(), idx[1:].ravel(), w.ravel()))
        w = 0.5 * (nodes[1:, 1:-1, 1, 1] + nodes[:-1, 1:-1, 1, 1])
        parts.append(_pair_entries(idx[:, :-1].ravel(), idx[:, 1:].ravel(), w.ravel()))
        # boundary nodes carry no cross term (reflected off-diagonals cancel)
        c00, c10, c01, c11 = idx[:-1, :-1], idx[1:, :-1], idx[:-1, 1:], idx[1:, 1:]
        beta = nodes[1:-1, 1:-1, 0, 1]
    cells = [c.ravel() for c in (c00, c10, c01, c11)]
    beta = beta.ravel()
    for i in range(4):
        for j in range(4):
            if _CROSS[i, j] != 0:
                parts.append((cells[i], cells[j], _CROSS[i, j] * beta))
    rows, cols, vals = (np.concatenate(x) for x in zip(*parts))
    return rows, cols, vals


def assemble(t, scheme=Scheme.ADLBR):
    """Assemble the sparse operator of ``scheme`` for the tensor field ``t``.

    Stencil schemes give each pair (z, z + e) the coefficient
    ``gamma_z(e) + gamma_{z+e}(-e)``; arms leaving a Neumann grid are
    dropped.  FD uses centered differences with node tensors averaged from
    the four adjacent cells.
    """
    scheme = Scheme(scheme)
    if min(t.shape) < 3:
        raise ValueError("grid extents must be at least 3")
    if scheme == Scheme.FD:
        rows, cols, vals = _assemble_fd(t)
    else:
        rows, cols, vals = _assemble_stencil(t, scheme)
    N = int(np.prod(t.shape))
    A = sp.coo_matrix((vals / t.h**2, (rows, cols)), shape=(N, N)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return SparseOperator(A, tuple(t.shape), t.h, t.boundary, scheme)


def energy(u, t, scheme=Scheme.ADLBR):
    """h^(d-2) sum_z sum_e gamma_z(e) |u(z + e) - u(z)|^2, evaluated directly."""
    scheme = Scheme(scheme)
    if scheme == Scheme.FD:
        raise ValueError("energy is defined for the stencil schemes")
    if u.shape != t.shape or u.boundary != t.boundary or u.h != t.h:
        raise ValueError("field and tensor grids differ")
    flat = u.values.ravel()
    total = 0.0
    for z, nb, w in stencil_arms(t, scheme):
        total += float(np.dot(w, (flat[nb] - flat[z]) ** 2))
    return t.h ** (u.dim - 2) * total


def explicit_step(u, A, dt):
    """One forward Euler step u - dt A u."""
    return u.replace(u.values - dt * A.apply(u.values))


def cg_solve(A, lam, v, tol=1e-10, jacobi=False, maxiter=None):
    """Solve (I + lam A) u = v by conjugate gradients.

    Stops once ``||(I + lam A) u - v|| <= tol ||v||``.

    Raises
    ------
    ConvergenceError
        After ``maxiter`` iterations (default ten times the number of cells).
    """
    if lam < 0 or not tol > 0:
        raise ValueError("need lam >= 0 and tol > 0")
    b = v.values.ravel()
    if lam == 0:
        return v.replace(b.copy())
    M = A.matrix

    def op(x):
        return x + lam * (M @ x)

    inv_diag = 1.0 / (1.0 + lam * M.diagonal()) if jacobi else None
    maxiter = 10 * b.size if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0:
        return v.replace(x)
    r = b.copy()
    z = r * inv_diag if jacobi else r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxiter):
        Ap = op(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res <= tol * bnorm:
            return v.replace(x)
        z = r * inv_diag if jacobi else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {maxiter} iterations (relative residual {res / bnorm:.3e})",
        residual=res / bnorm,
    )


def eigen_max(A, tol=1e-6, seed=0, maxiter=100_000):
    """Largest eigenvalue by power iteration from a seeded random start.

    Converged when ``||A x - rho x|| <= tol * rho`` for the Rayleigh
    quotient ``rho``.  For a PSD matrix ``rho`` never decreases along the
    iteration, so when the top of the spectrum is tightly clustered (and
    the residual test is slow) the iteration also stops once ``rho`` gains
    less than ``STALL_RTOL * tol * rho`` over a check window.
    """
    M = A.matrix if isinstance(A, SparseOperator) else A
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    res = np.inf
    prev = -np.inf
    for it in range(maxiter):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        # the residual costs two extra passes; test it every few steps
        if it % 8 == 0 or it == maxiter - 1:
            rho = float(x @ y)
            res = np.linalg.norm(y - rho * x)
            if res <= tol * abs(rho) or 0 <= rho - prev <= STALL_RTOL * tol * abs(rho):
                return rho
            prev = rho
        x = y / ny
    raise ConvergenceError(f"power iteration did not converge in {maxiter} iterations", residual=res)


DENSE_MAX_CELLS = 4096


def eigen_smallest(A, k):
    """The ``k`` smallest eigenvalues, ascending, from a dense symmetric solve."""
    M = A.matrix if isinstance(A, SparseOperator) else A
    if M.shape[0] > DENSE_MAX_CELLS:
        raise ValueError(f"grid too large for a dense solve ({M.shape[0]} > {DENSE_MAX_CELLS} cells)")
    dense = M.toarray() if sp.issparse(M) else np.asarray(M)
    return np.linalg.eigvalsh(dense)[:k]
