#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_backends.py [--repeat N]

Each kernel is exercised on a workload representative of the package's
hot paths (lattice FID curves, spectral reconstruction of the oracle FID,
coherent-state quadrature batches, measurement-direction scans). The
numba implementations are warmed up before timing so JIT compilation is
excluded.
"""

import argparse
import time

import numpy as np

from spinfid import _kernels as K

RNG = np.random.default_rng(0)


def workload_lattice_fid():
    n = 24
    b = RNG.uniform(-1, 1, (n, n))
    b = np.ascontiguousarray((b + b.T) / 2)
    np.fill_diagonal(b, 0.0)
    t = np.ascontiguousarray(np.linspace(0, 10, 2000))
    return "lattice_fid (24 sites x 2000 t)", "lattice_fid", (4, b, t)


def workload_fid_product():
    b = np.ascontiguousarray(RNG.uniform(-1, 1, 50))
    t = np.ascontiguousarray(np.linspace(0, 10, 5000))
    return "fid_product (50 neighbors x 5000 t)", "fid_product", (3, b, t)


def workload_cos_sum():
    p = 60000
    w = np.ascontiguousarray(RNG.uniform(0, 1, p))
    f = np.ascontiguousarray(RNG.uniform(-10, 10, p))
    t = np.ascontiguousarray(np.linspace(0, 10, 400))
    return "cos_sum (60000 lines x 400 t)", "cos_sum", (w, f, t)


def workload_scs_overlaps():
    d = 4
    h = RNG.normal(size=(d * d, d * d)) + 1j * RNG.normal(size=(d * d, d * d))
    h = h @ h.conj().T
    rho4 = np.ascontiguousarray((h / np.trace(h)).reshape(d, d, d, d))
    amps = RNG.normal(size=(64 * 128, d)) + 1j * RNG.normal(size=(64 * 128, d))
    amps = np.ascontiguousarray(amps / np.linalg.norm(amps, axis=1, keepdims=True))
    return "scs_overlaps (8192 states, d=4)", "scs_overlaps", (rho4, amps)


def workload_entropy_batch():
    d = 4
    a = RNG.normal(size=(8192, d, d)) + 1j * RNG.normal(size=(8192, d, d))
    mats = np.ascontiguousarray(a @ a.conj().transpose(0, 2, 1) + 1e-3 * np.eye(d))
    return "entropy_norm_batch (8192 x 4x4)", "entropy_norm_batch", (mats,)


def workload_vn_grid():
    h = RNG.normal(size=(4, 4)) + 1j * RNG.normal(size=(4, 4))
    h = h @ h.conj().T
    rho4 = np.ascontiguousarray((h / np.trace(h)).reshape(2, 2, 2, 2))
    th = RNG.uniform(0, np.pi, 2048)
    ph = RNG.uniform(0, 2 * np.pi, 2048)
    dirs = np.ascontiguousarray(np.column_stack(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]))
    return "vn_info_grid (2048 directions)", "vn_info_grid", (rho4, dirs, 1.0)


WORKLOADS = [
    workload_lattice_fid,
    workload_fid_product,
    workload_cos_sum,
    workload_scs_overlaps,
    workload_entropy_batch,
    workload_vn_grid,
]


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = parser.parse_args()

    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'workload':42s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for make in WORKLOADS:
        label, name, call_args = make()
        np_fn = K.impl(name, "numpy")
        nb_fn = K.impl(name, "numba")
        nb_fn(*call_args)  # warm-up / JIT
        t_np = best_of(np_fn, call_args, args.repeat)
        t_nb = best_of(nb_fn, call_args, args.repeat)
        print(f"{label:42s} {t_np * 1e3:8.2f}ms {t_nb * 1e3:8.2f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
