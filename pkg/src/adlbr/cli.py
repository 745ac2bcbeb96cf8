"""Command-line entry point: ``adlbr <subcommand> ...``.

Exit status is 0 on success, 1 on a runtime or numerical failure and 2 on
a usage or validation error.
"""

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from adlbr import imageio, stencil
from adlbr.diffusion import diffusion_tensor, evolve, radial_phantom
from adlbr.errors import (
    ConvergenceError,
    FormatError,
    InstabilityError,
    NotSPDError,
    SearchBoundError,
)
from adlbr.operator import (
    Boundary,
    ScalarField,
    Scheme,
    TensorField,
    assemble,
    cg_solve,
    eigen_max,
    eigen_smallest,
)
from adlbr.synthetic import SyntheticCase, run_benchmark
from adlbr.tensor import StructureParams

log = logging.getLogger("adlbr")

BENCH_COLUMNS = ["scheme", "kappa", "n", "l2_rel", "h1_rel", "wall_ms"]
EIGEN_COLUMNS = ["scheme", "n", "index", "eigenvalue"]


class UsageError(ValueError):
    pass


def _positive(kind=float):
    def parse(text):
        try:
            x = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not x > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return x
    return parse


def _nonneg(text):
    x = float(text)
    if not x >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return x


def _list(kind):
    def parse(text):
        items = [s for s in text.replace(",", " ").split() if s]
        try:
            return [kind(s) for s in items]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def rotated_tensor(kappa, theta=math.pi / 6):
    """Tensor with unit eigenvalue along (cos theta, sin theta) and kappa^-2 across."""
    e = np.array([math.cos(theta), math.sin(theta)])
    f = np.array([-e[1], e[0]])
    return np.outer(e, e) + np.outer(f, f) / kappa**2


def _tensor_from_args(a):
    if a.kappa is not None:
        if a.kappa < 1:
            raise UsageError("--kappa must be >= 1")
        return rotated_tensor(a.kappa, a.theta)
    if a.d11 is None or a.d12 is None or a.d22 is None:
        raise UsageError("give --kappa [--theta] or --d11 --d12 --d22")
    three = [a.d13, a.d23, a.d33]
    if all(x is None for x in three):
        return np.array([[a.d11, a.d12], [a.d12, a.d22]])
    if any(x is None for x in three):
        raise UsageError("a 3x3 tensor needs --d13 --d23 --d33")
    return np.array([[a.d11, a.d12, a.d13], [a.d12, a.d22, a.d23], [a.d13, a.d23, a.d33]])


def _add_tensor_flags(p):
    for name in ("d11", "d12", "d22", "d13", "d23", "d33"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--kappa", type=float, help="test tensor with anisotropy kappa")
    p.add_argument("--theta", type=float, default=math.pi / 6, help="test tensor orientation (radians)")


def _add_structure_flags(p, C=1e-5):
    p.add_argument("--sigma", type=_nonneg, default=0.5, help="pre-smoothing scale (pixels)")
    p.add_argument("--rho", type=_nonneg, default=4.0, help="integration scale (pixels)")
    p.add_argument("--C", type=_positive(), default=C, help="contrast parameter")
    p.add_argument("--alpha", type=float, default=1e-2, help="diffusivity floor in (0, 1)")


def _params(a):
    return StructureParams(a.sigma, a.rho, a.C, a.alpha)


def _steps(a):
    if a.steps is not None:
        return a.steps
    n = round(a.T / a.dt)
    if abs(n * a.dt - a.T) > 1e-9 * max(a.T, 1.0):
        log.warning("T = %g is not a multiple of dt = %g; running %d steps", a.T, a.dt, n)
    return n


# ---------------------------------------------------------------- stencil


def cmd_stencil(a):
    D = _tensor_from_args(a)
    if a.scheme == "adlbr":
        s = stencil.adlbr_stencil_2d(D) if D.shape[0] == 2 else stencil.adlbr_stencil_3d(D)
    else:
        if D.shape[0] != 2:
            raise UsageError("the A-NN scheme is two dimensional only")
        s = stencil.ann_stencil_2d(D)
    rows = [(e, w, -2.0 * w) for e, w in s.as_dict().items()]
    rows.sort(key=lambda r: (-r[1], r[0]))
    print(f"scheme {a.scheme}, tensor {np.array2string(D, precision=6, separator=', ')}")
    print(f"{'offset':>14} {'gamma':>12} {'coefficient':>12}")
    for e, w, c in rows:
        print(f"{str(e):>14} {w:12.6f} {c:12.6f}")
    print(f"{'center':>14} {'':>12} {s.center_coefficient():12.6f}")
    print(f"radius {stencil.stencil_radius(s):.6f}")
    print(f"decomposition residual {stencil.decomposition_residual(s, D):.3e}")
    print(f"symbol max {stencil.symbol_max(s):.6f}")
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset", "gamma", "coefficient"])
            for e, g, c in rows:
                w.writerow([" ".join(str(x) for x in e), repr(g), repr(c)])
            w.writerow(["center", "", repr(s.center_coefficient())])
    return 0


# ---------------------------------------------------------------- 2D images


def _read_image(a):
    u = imageio.read_pgm(a.input, Boundary(a.boundary))
    return u.replace(u.values * a.intensity_scale)


def _write_image(u, a):
    imageio.write_pgm(u, a.output, clip=(0.0, a.intensity_scale))


def cmd_ced(a):
    u = _read_image(a)
    steps = _steps(a)
    res = evolve(u, _params(a), a.dt, steps, "ced", a.scheme, a.resume_every)
    print(f"largest eigenvalue at t=0: {res.lambda_max0:.6g}")
    print(f"{res.steps} steps, {res.rebuilds} operator builds")
    _write_image(res.u, a)
    return 0


def cmd_restore(a):
    u = _read_image(a)
    if a.tensor:
        t = imageio.read_volume(a.tensor, Boundary(a.boundary))
        if not isinstance(t, TensorField) or t.shape != u.shape:
            raise UsageError("tensor volume must be a sym2 field matching the image")
        t = TensorField(t.values, u.h, u.boundary)
    else:
        t = diffusion_tensor(u, _params(a), "ced")
    A = assemble(t, a.scheme)
    out = cg_solve(A, a.lam, u, tol=a.tol, jacobi=a.jacobi)
    _write_image(out, a)
    return 0


# ---------------------------------------------------------------- bench


def cmd_bench(a):
    if not a.kappa or not a.n or not a.scheme:
        raise UsageError("--kappa, --n and --scheme lists must be non-empty")
    settings = []
    for s in a.scheme:
        for k in a.kappa:
            for n in a.n:
                key = (Scheme(s).value, float(k), int(n))
                if key not in settings:
                    settings.append(key)
    cases = [(s, SyntheticCase(k, n, a.alpha_diffeo, a.lam)) for s, k, n in settings]
    results = [run_benchmark(c, s, jacobi=a.jacobi) for s, c in cases]
    print(f"{'scheme':>7} {'kappa':>8} {'n':>6} {'l2_rel':>12} {'h1_rel':>12} {'wall_ms':>10}")
    for r in results:
        print(f"{r.scheme:>7} {r.kappa:8.3g} {r.n:6d} {r.l2_rel:12.4e} {r.h1_rel:12.4e} {r.wall_ms:10.1f}")
    if a.out:
        new = not os.path.exists(a.out) or os.path.getsize(a.out) == 0
        with open(a.out, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(BENCH_COLUMNS)
            for r in results:
                w.writerow([r.scheme, repr(r.kappa), r.n, repr(r.l2_rel), repr(r.h1_rel), f"{r.wall_ms:.3f}"])
    return 0


# ---------------------------------------------------------------- eigen


def cmd_eigen(a):
    boundary = Boundary(a.boundary)
    if a.from_image:
        u = imageio.read_pgm(a.from_image, boundary)
        u = u.replace(u.values * a.intensity_scale)
        t = diffusion_tensor(u, _params(a), "ced")
        A = assemble(t, a.scheme)
        if a.export_mtx:
            A.write_matrix_market(a.export_mtx)
        print(f"largest eigenvalue: {eigen_max(A, seed=a.seed):.6g}")
        return 0
    D = _tensor_from_args(a)
    rows = []
    for n in a.n:
        # the largest eigenvalue uses pixel units, the low spectrum the unit torus
        h = 1.0 if a.mode == "max" else 1.0 / n
        t = TensorField.constant(D, (n,) * D.shape[0], h, boundary)
        A = assemble(t, a.scheme)
        if a.export_mtx:
            root, ext = os.path.splitext(a.export_mtx)
            A.write_matrix_market(a.export_mtx if len(a.n) == 1 else f"{root}_n{n}{ext or '.mtx'}")
        if a.mode == "max":
            vals = [eigen_max(A, seed=a.seed)]
        else:
            vals = list(eigen_smallest(A, a.k))
        for i, v in enumerate(vals):
            rows.append((a.scheme, n, i, float(v)))
        print(f"n={n}: " + " ".join(f"{v:.6g}" for v in vals))
    if a.mode == "max" and a.scheme != "fd":
        s = stencil.adlbr_stencil_2d(D) if a.scheme == "adlbr" and D.shape[0] == 2 else (
            stencil.adlbr_stencil_3d(D) if a.scheme == "adlbr" else stencil.ann_stencil_2d(D))
        sup = stencil.symbol_max(s)
        print(f"symbol supremum (n -> infinity): {sup:.6g}")
        for _, n, _, v in rows:
            log.info("n=%d (%s): eigen_max / symbol sup = %.6f", n, "even" if n % 2 == 0 else "odd", v / sup)
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EIGEN_COLUMNS)
            for r in rows:
                w.writerow([r[0], r[1], r[2], repr(r[3])])
    return 0


# ---------------------------------------------------------------- 3D


def _volume_input(a):
    if a.phantom:
        _, noisy = radial_phantom(a.phantom, a.noise_sd, a.seed)
        if a.save_input:
            imageio.write_volume(noisy, a.save_input)
        return noisy
    if not a.input:
        raise UsageError("give an input volume or --phantom N")
    u = imageio.read_volume(a.input)
    if not isinstance(u, ScalarField) or u.dim != 3:
        raise UsageError("input must be a 3D scalar volume")
    return u


def _cmd_3d(a, kind):
    u = _volume_input(a)
    u = ScalarField(u.values, 1.0, Boundary(a.boundary))
    res = evolve(u, _params(a), a.dt, _steps(a), kind, "adlbr", a.resume_every)
    print(f"largest eigenvalue at t=0: {res.lambda_max0:.6g}")
    print(f"{res.steps} steps, {res.rebuilds} operator builds")
    imageio.write_volume(res.u, a.output)
    return 0


def cmd_ced3d(a):
    return _cmd_3d(a, "ced")


def cmd_eed3d(a):
    return _cmd_3d(a, "eed")


# ---------------------------------------------------------------- parser


def _add_time_flags(p, dt, T):
    p.add_argument("--dt", type=_positive(), default=dt, help="time step")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--T", type=_nonneg, default=T, help="final time")
    g.add_argument("--steps", type=int, help="number of steps (overrides --T)")
    p.add_argument("--resume-every", type=_positive(int), default=1,
                   help="rebuild the tensor and operator every N steps")


def _add_io_flags(p):
    p.add_argument("input", help="input PGM (P2 or P5)")
    p.add_argument("output", help="output PGM (P5)")
    p.add_argument("--intensity-scale", type=_positive(), default=1.0,
                   help="grey levels are read as [0, scale]; output clips to the same range")
    p.add_argument("--boundary", choices=[b.value for b in Boundary], default="neumann")


def build_parser():
    parser = argparse.ArgumentParser(prog="adlbr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    # accept -v after the subcommand as well, without resetting the count
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def new(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = new("stencil", help="stencil of a constant tensor")
    _add_tensor_flags(p)
    p.add_argument("--scheme", choices=["adlbr", "ann"], default="adlbr")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_stencil)

    p = new("ced", help="coherence-enhancing diffusion of a 2D image")
    _add_io_flags(p)
    _add_structure_flags(p)
    _add_time_flags(p, dt=0.02, T=10.0)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="adlbr")
    p.set_defaults(func=cmd_ced)

    p = new("restore", help="penalized least squares restoration")
    _add_io_flags(p)
    _add_structure_flags(p)
    p.add_argument("--lam", type=_nonneg, default=1e-3, help="smoothing weight")
    p.add_argument("--tol", type=_positive(), default=1e-10, help="relative CG residual")
    p.add_argument("--jacobi", action="store_true", help="Jacobi-preconditioned CG")
    p.add_argument("--tensor", help="sym2 ADLBRv1 volume to use instead of the CED map")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="adlbr")
    p.set_defaults(func=cmd_restore)

    p = new("bench", help="synthetic restoration benchmark")
    p.add_argument("--kappa", type=_list(float), default=[2.0, 10.0])
    p.add_argument("--n", type=_list(int), default=[100, 200, 400])
    p.add_argument("--scheme", type=_list(str), default=["adlbr", "ann", "fd"])
    p.add_argument("--alpha-diffeo", type=float, default=1.0 / 3.0)
    p.add_argument("--lam", type=_positive(), default=1e-3)
    p.add_argument("--jacobi", action="store_true")
    p.add_argument("--out", help="CSV file to append rows to")
    p.set_defaults(func=cmd_bench)

    p = new("eigen", help="spectrum of a constant-tensor operator")
    _add_tensor_flags(p)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="adlbr")
    p.add_argument("--mode", choices=["max", "smallest"], default="max")
    p.add_argument("--k", type=_positive(int), default=7, help="eigenvalues in smallest mode")
    p.add_argument("--n", type=_list(int), default=[64], help="grid sizes (sweep)")
    p.add_argument("--boundary", choices=[b.value for b in Boundary], default="periodic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--export-mtx", help="write the operator(s) as MatrixMarket")
    p.add_argument("--csv", help="write eigenvalues as CSV")
    p.add_argument("--from-image", help="use the CED tensor of this PGM instead")
    p.add_argument("--intensity-scale", type=_positive(), default=1.0)
    _add_structure_flags(p)
    p.set_defaults(func=cmd_eigen)

    for name, func, C in (("ced3d", cmd_ced3d, 1e-5), ("eed3d", cmd_eed3d, 1e-5)):
        p = new(name, help=f"3D {name[:3].upper()} of a volume")
        p.add_argument("input", nargs="?", help="input ADLBRv1 scalar volume")
        p.add_argument("output", help="output ADLBRv1 volume")
        p.add_argument("--phantom", type=_positive(int), help="use the radial phantom at N^3")
        p.add_argument("--noise-sd", type=_nonneg, default=0.5)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--save-input", help="write the generated phantom here")
        p.add_argument("--boundary", choices=[b.value for b in Boundary], default="neumann")
        _add_structure_flags(p, C=C)
        _add_time_flags(p, dt=1e-3, T=0.02)
        p.set_defaults(func=func)
    return parser


def _validate(a):
    if hasattr(a, "alpha") and not 0 < a.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if getattr(a, "steps", None) is not None and a.steps < 0:
        raise UsageError("--steps must be non-negative")
    if a.command == "eigen" and not a.n:
        raise UsageError("--n must list at least one grid size")
    if a.command == "eigen" and min(a.n) < 3:
        raise UsageError("grid sizes must be at least 3")


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * a.verbose, format="%(levelname)s: %(message)s")
    try:
        _validate(a)
        return a.func(a)
    except (UsageError, NotSPDError, FormatError, ValueError) as exc:
        print(f"adlbr: error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, InstabilityError, SearchBoundError) as exc:
        print(f"adlbr: numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"adlbr: {exc}", file=sys.stderr)
        return 1


__all__ = ["main", "build_parser", "rotated_tensor"]
