"""Compare the compiled and pure-Python stencil kernels.

    python3 benchmarks/bench_kernels.py [--cells 20000] [--repeat 3]

Times ``stencil_field`` on a batch of random SPD tensors for each scheme
and dimension, checks that both backends return the same stencils, and
prints the speedup.  Also times one full operator assembly on a 256^2 grid.
"""

import argparse
import math
import time

import numpy as np

from adlbr import kernels
from adlbr.operator import TensorField, assemble


def random_spd(rng, count, d, kappa_max):
    q, r = np.linalg.qr(rng.standard_normal((count, d, d)))
    q = q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]
    k = np.exp(rng.uniform(0, math.log(kappa_max), count))
    ev = k[:, None] ** (-2 * rng.uniform(0, 1, (count, d)))
    ev[:, 0], ev[:, 1] = 1.0, k**-2
    D = np.einsum("nij,nj,nkj->nik", q, ev, q)
    return 0.5 * (D + np.swapaxes(D, 1, 2))


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    backends = sorted(kernels.BACKENDS)
    if "compiled" not in backends:
        print("compiled extension not available; timing the fallback only")
    print(f"{'case':<12} " + " ".join(f"{b + ' (ms)':>15}" for b in backends) + f" {'speedup':>9}")
    for d, scheme, kmax in ((2, "adlbr", 100.0), (3, "adlbr", 100.0), (2, "ann", 20.0)):
        D = random_spd(rng, a.cells, d, kmax)
        timing, outs = {}, {}
        for b in backends:
            timing[b], outs[b] = best_of(lambda: kernels.stencil_field(D, scheme, backend=b), a.repeat)
        if len(backends) == 2:
            (o1, w1), (o2, w2) = outs["compiled"], outs["python"]
            assert np.array_equal(o1, o2) and np.allclose(w1, w2, rtol=1e-12, atol=1e-14)
            speed = f"{timing['python'] / timing['compiled']:8.1f}x"
        else:
            speed = ""
        row = " ".join(f"{1e3 * timing[b]:15.1f}" for b in backends)
        print(f"{scheme + f' {d}D':<12} {row} {speed:>9}")
    t = TensorField(random_spd(rng, 256 * 256, 2, 50.0).reshape(256, 256, 2, 2), 1.0, "neumann")
    elapsed, _ = best_of(lambda: assemble(t, "adlbr"), a.repeat)
    print(f"assemble 256^2 adlbr with {kernels.BACKEND} backend: {1e3 * elapsed:.1f} ms")


if __name__ == "__main__":
    main()
