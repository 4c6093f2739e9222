#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

The same array-level jobs are timed through both implementations directly
(no env flag needed); results should agree to roundoff while the jitted path
is expected to win by a wide margin on the field/residual assemblies.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]
"""
import argparse
import time

import numpy as np

from hfbeam import _kernels_numpy as knp

try:
    from hfbeam import _kernels_numba as knb
except ImportError:
    knb = None


def beam_job(npts, nbeams, n, order, seed=0):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.uniform(-2, 2, size=(npts, n)))
    x = rng.uniform(-2, 2, size=(nbeams, n))
    p = rng.normal(size=(nbeams, n)) + 2.0
    S = rng.normal(size=nbeams)
    M = rng.normal(size=(nbeams, n, n))
    M = 0.5 * (M + M.swapaxes(1, 2)) + 1j * np.eye(n)[None]
    A = (rng.normal(size=nbeams) + 1j * rng.normal(size=nbeams))
    xd = rng.normal(size=(nbeams, n))
    pd = rng.normal(size=(nbeams, n))
    Sd = np.zeros(nbeams)
    Md = 0.1 * (rng.normal(size=(nbeams, n, n)) + 1j * rng.normal(size=(nbeams, n, n)))
    Md = 0.5 * (Md + Md.swapaxes(1, 2))
    Ad = 0.1 * (rng.normal(size=nbeams) + 1j * rng.normal(size=nbeams))
    z3 = np.zeros((nbeams, n, n, n), dtype=complex)
    z1 = np.zeros((nbeams, n), dtype=complex)
    w = np.full(nbeams, 1.0 / nbeams)
    Rskip = np.full(nbeams, 2.0)
    r_rho = np.full(nbeams, np.inf)
    eps = 1e-2
    return (pts, order, x, p, S, M, A, xd, pd, Sd, Md, Ad,
            z3, z1, z3, z1, w, Rskip, r_rho, 1.0 / eps, 50.0)


def residual_job(npts, nbeams, n, seed=0):
    args = beam_job(npts, nbeams, n, 1, seed)
    rng = np.random.default_rng(seed + 1)
    csq = np.ascontiguousarray(1.0 + 0.1 * rng.random(npts))
    xdd = rng.normal(size=(nbeams, n))
    pdd = rng.normal(size=(nbeams, n))
    Mdd = 0.1 * (rng.normal(size=(nbeams, n, n)) + 1j * rng.normal(size=(nbeams, n, n)))
    Mdd = 0.5 * (Mdd + Mdd.swapaxes(1, 2))
    Add = 0.1 * (rng.normal(size=nbeams) + 1j * rng.normal(size=nbeams))
    pts, order = args[0], args[1]
    rest = args[2:12]
    tail = args[12:]
    return (pts, csq, order, *rest, xdd, pdd, Mdd, Add, *tail)


def leapfrog_job(nx, nsteps, seed=0):
    rng = np.random.default_rng(seed)
    u0 = rng.normal(size=nx) + 1j * rng.normal(size=nx)
    u0[0] = u0[-1] = 0.0
    u1 = u0 * np.exp(0.01j)
    u1[0] = u1[-1] = 0.0
    coef = np.full(nx, 0.5)
    return (u0, u1, coef, nsteps)


def gather_job(npts, seed=0):
    rng = np.random.default_rng(seed)
    F = (rng.normal(size=(512, 256)) + 1j * rng.normal(size=(512, 256)))
    fx = rng.uniform(1.0, 512 - 3.0, size=npts)
    fp = rng.uniform(1.0, 256 - 3.0, size=npts)
    return (F, fx, fp)


def timeit(fn, args, repeat):
    fn(*args)  # warm up (jit compile)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0,
                    help="scale the problem sizes")
    opts = ap.parse_args()
    s = opts.scale

    jobs = [
        ("field_sum 1D k=1", "field_sum",
         beam_job(int(40000 * s), int(200 * s) or 2, 1, 1)),
        ("field_sum 3D k=1", "field_sum",
         beam_job(int(5000 * s) or 10, int(1000 * s) or 10, 3, 1)),
        ("residual_sum 1D", "residual_sum",
         residual_job(int(20000 * s) or 10, int(100 * s) or 2, 1)),
        ("leapfrog 1D", "leapfrog", leapfrog_job(int(20000 * s) or 64, 400)),
        ("cubic_gather_2d", "cubic_gather_2d", gather_job(int(200000 * s) or 100)),
    ]

    print(f"{'job':<22} {'numpy [s]':>12} {'numba [s]':>12} {'speedup':>9}")
    for label, name, args in jobs:
        t_np = timeit(getattr(knp, name), args, opts.repeat)
        if knb is None:
            print(f"{label:<22} {t_np:>12.4f} {'n/a':>12} {'n/a':>9}")
            continue
        t_nb = timeit(getattr(knb, name), args, opts.repeat)
        a = getattr(knp, name)(*args)
        b = getattr(knb, name)(*args)
        a0 = a[0] if isinstance(a, tuple) else a
        b0 = b[0] if isinstance(b, tuple) else b
        ok = np.allclose(a0, b0, rtol=1e-10, atol=1e-12)
        print(f"{label:<22} {t_np:>12.4f} {t_nb:>12.4f} {t_np / t_nb:>8.1f}x"
              + ("" if ok else "  [MISMATCH]"))


if __name__ == "__main__":
    main()
