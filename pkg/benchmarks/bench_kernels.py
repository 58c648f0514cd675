"""Timing comparison of the numba kernels against the numpy fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py          # full sizes
    python3 benchmarks/bench_kernels.py --quick  # smaller sizes

Requires the numba backend (leave TENSORCHAIN_NUMBA unset).  Each kernel is
warmed up once so JIT compilation is excluded from the timings, and the two
backends are checked against each other before timing.
"""

import argparse
import itertools
import time

import numpy as np

from tensorchain import kernels
from tensorchain import rng as trng


def timeit(fn, args, repeats):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def build_cases(quick: bool):
    gen = trng.stream(2024, 0)
    ns, nt, d = (400, 8, 4) if quick else (4000, 8, 4)
    trajs = np.ascontiguousarray(
        gen.standard_normal((ns, nt, d, d)) + 1j * gen.standard_normal((ns, nt, d, d))
    )
    herm = np.ascontiguousarray((trajs[:, 0] + trajs[:, 0].conj().transpose(0, 2, 1)) / 2)

    ncols = 32 if quick else 64
    mat = gen.standard_normal((ncols // 2, ncols)) + 1j * gen.standard_normal(
        (ncols // 2, ncols)
    )
    mat /= np.sqrt(ncols // 2)
    gram = np.ascontiguousarray(mat.conj().T @ mat)

    npts = 64 if quick else 256
    pts = gen.uniform(-1, 1, (npts, 3))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    dist = np.ascontiguousarray((dist + dist.T) / 2)

    small = dist[:16, :16].copy()
    subs = np.array(list(itertools.combinations(range(16), 4)), dtype=np.int64)

    members = np.concatenate(
        [np.arange(1), np.arange(4), np.arange(16), np.arange(npts)]
    ).astype(np.int64)
    offsets = np.array([0, 1, 5, 21, 21 + npts], dtype=np.int64)
    weights = np.array([1.0, 2.0**0.5, 2.0, 4.0])

    within = dist <= np.quantile(dist[dist > 0], 0.3)

    return {
        "ensemble_pairwise_norms": (trajs, kernels.GAUGE_SPECTRAL),
        "ensemble_norms_vs_ref": (trajs, 0, kernels.GAUGE_SPECTRAL),
        "batch_lambda_max": (herm,),
        "batch_spectral": (trajs[:, 0],),
        "rip_scan": (gram, 3),
        "farthest_point_order": (dist,),
        "chain_sum": (dist, members, offsets, weights),
        "gamma2_scan": (small, subs, 2.0**0.5),
        "greedy_cover": (within,),
        "max_triangle_violation": (small,),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        raise SystemExit("numba backend inactive; unset TENSORCHAIN_NUMBA to benchmark")

    cases = build_cases(args.quick)
    print(f"{'kernel':<26} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for name, call_args in cases.items():
        nb = kernels.get_impl(name, "numba")
        np_ = kernels.get_impl(name, "numpy")
        got_nb, got_np = nb(*call_args), np_(*call_args)
        assert np.allclose(got_nb, got_np, rtol=1e-10, atol=1e-10), name
        t_nb = timeit(nb, call_args, args.repeats)
        t_np = timeit(np_, call_args, args.repeats)
        print(f"{name:<26} {t_nb:>12.6f} {t_np:>12.6f} {t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
