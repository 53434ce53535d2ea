"""Benchmark the jitted kernels against the pure-numpy fallback.

Times the master-equation right-hand side and a short decay trajectory
for a range of atom numbers, on both backends:

    python benchmarks/bench_backends.py --sizes 4,6,8 --reps 20
"""

import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from subrad.coupling import build_couplings
from subrad.dynamics import build_coefficients
from subrad.geometry import build_chain
from subrad.kernels import numba_backend, numpy_backend
from subrad.manybody import mixture_state

BACKENDS = (numba_backend, numpy_backend)


def _time(fn, reps):
    fn()  # warm-up (jit compile, index caches)
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def bench_rhs(n_atoms, reps):
    cfg = build_chain(n_atoms, np.pi / 2)
    cpl = build_couplings(cfg)
    amat, drive = build_coefficients(cpl, None, cfg)
    rho = mixture_state(n_atoms)
    out = np.empty_like(rho)
    results = {}
    for backend in BACKENDS:
        results[backend.NAME] = _time(
            lambda: backend.lindblad_rhs(rho, amat, cpl.gamma, drive, out),
            reps)
    return results


def bench_trajectory(n_atoms, t_final, reps):
    cfg = build_chain(n_atoms, np.pi / 2)
    cpl = build_couplings(cfg)
    amat, drive = build_coefficients(cpl, None, cfg)
    rho0 = mixture_state(n_atoms)
    results = {}
    for backend in BACKENDS:
        def run():
            stepper = backend.Stepper(amat, cpl.gamma, drive, 1e-8, 1e-10)
            stepper.start(rho0, 0.0, t_final)
            stepper.advance_to(t_final)
        results[backend.NAME] = _time(run, reps)
    return results


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="2,4,6,8",
                        help="comma-separated atom numbers")
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--traj-reps", type=int, default=3)
    parser.add_argument("--t-final", type=float, default=5.0)
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'N':>3} {'dim':>6} | {'rhs numba':>12} {'rhs numpy':>12} "
          f"{'speedup':>8} | {'traj numba':>12} {'traj numpy':>12} "
          f"{'speedup':>8}")
    # BLAS worker threads spin-waiting after numpy-backend calls would
    # corrupt the jitted-kernel timings; keep BLAS single-threaded here.
    with threadpool_limits(limits=1, user_api="blas"):
        for n in sizes:
            rhs = bench_rhs(n, args.reps)
            traj = bench_trajectory(n, args.t_final, args.traj_reps)
            print(f"{n:>3} {1 << n:>6} "
                  f"| {rhs['numba'] * 1e3:>10.3f}ms "
                  f"{rhs['numpy'] * 1e3:>10.3f}ms "
                  f"{rhs['numpy'] / rhs['numba']:>7.1f}x "
                  f"| {traj['numba'] * 1e3:>10.1f}ms "
                  f"{traj['numpy'] * 1e3:>10.1f}ms "
                  f"{traj['numpy'] / traj['numba']:>7.1f}x")


if __name__ == "__main__":
    main()
