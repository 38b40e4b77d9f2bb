"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both versions are called directly, so the DRFD_NUMBA flag does not matter
here. Outputs are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from drfd import _kernels as K
from drfd.sysmodel import three_tank_system


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def lti_case(rng):
    sys = three_tank_system()
    T = 200_000
    u = rng.standard_normal((T, sys.nu))
    d = rng.standard_normal((T, sys.nd))
    f = np.zeros((T, sys.nf))
    args = (sys.A, sys.B, sys.Bd, sys.Bf, u, d, f, np.zeros(sys.nx))
    return "lti_states (T=2e5)", K._lti_states_np, K._lti_states_nb, args


def tail_case(rng):
    n, k, N = 9, 64, 1_000_000
    atoms = rng.standard_normal((k, n))
    cumw = np.cumsum(np.full(k, 1.0 / k))
    M = np.eye(n) / n
    args = (atoms, cumw, 9.0, M, 1.0, rng.random(N), rng.random(N))
    return "radial_tail_count (N=1e6, n=9)", K._radial_tail_count_np, K._radial_tail_count_nb, args


def schur_case(rng):
    d, m = 40, 300
    Fa = rng.standard_normal((m, d, d))
    Fa = 0.5 * (Fa + Fa.transpose(0, 2, 1))
    A = rng.standard_normal((d, d))
    Sinv = A @ A.T + d * np.eye(d)
    B = rng.standard_normal((d, d))
    Z = B @ B.T + d * np.eye(d)
    return "schur_block (d=40, m=300)", K._schur_block_np, K._schur_block_nb, (Fa, Sinv, Z)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not K._HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, f_np, f_nb, a in (lti_case(rng), tail_case(rng), schur_case(rng)):
        r_np, r_nb = f_np(*a), f_nb(*a)
        if not np.allclose(r_np, r_nb, rtol=1e-10, atol=1e-10):
            raise SystemExit(f"{name}: backends disagree")
        t_np = best_of(lambda: f_np(*a), args.repeat)
        t_nb = best_of(lambda: f_nb(*a), args.repeat)
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
