#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

The longitudinal trace factors are the hot inner loop of every DN
assembly (they run once per edge per energy in sweeps).  Run:

    python3 benchmarks/bench_kernels.py

Backend selection at import time follows QNET_KERNELS; this script times
both backends explicitly plus one full end-to-end sweep each way.
"""

import time

import numpy as np

from qnet import _kernels
from qnet.network import Attachment, NetworkSpec, WellSpec, WireSpec
from qnet.pipeline import NetworkOperator


def time_kernels(backend: str, n_modes: int = 2048, reps: int = 400) -> float:
    _kernels.set_backend(backend)
    k2 = 40.0 - (np.arange(1, n_modes + 1) * np.pi / 2.0) ** 2
    # warm-up (numba compiles on first call)
    _kernels.same_edge_factors(k2, 1.7)
    _kernels.opposite_edge_factors(k2, 1.7)
    t0 = time.perf_counter()
    for _ in range(reps):
        _kernels.same_edge_factors(k2, 1.7)
        _kernels.opposite_edge_factors(k2, 1.7)
    return (time.perf_counter() - t0) / reps


def time_sweep(backend: str, points: int = 120) -> float:
    _kernels.set_backend(backend)
    net = NetworkSpec(
        wells=(WellSpec("w", a=2.0, b=2.0, mass=0.5),),
        wires=(
            WireSpec("L", width=1.0, mass_par=0.5, mass_perp=0.5,
                     attachments=(Attachment("w", "left", 0.25),)),
            WireSpec("R", width=1.0, mass_par=0.5, mass_perp=0.5,
                     attachments=(Attachment("w", "right", 0.75),)),
        ),
        fermi_level=20.0,
    )
    op = NetworkOperator(net, s_max=8)
    lams = np.linspace(12.9, 36.5, points) + 0.0123
    op.s_matrix(lams[0])
    t0 = time.perf_counter()
    for lam in lams:
        op.s_matrix(lam)
    return (time.perf_counter() - t0) / points


def main():
    rows = []
    for backend in ("numpy", "numba"):
        try:
            tk = time_kernels(backend)
            ts = time_sweep(backend)
        except ImportError:
            print(f"{backend:>6}: not available")
            continue
        rows.append((backend, tk, ts))
        print(f"{backend:>6}: kernel pair {tk * 1e6:9.1f} us   "
              f"S-matrix eval {ts * 1e3:8.2f} ms")
    if len(rows) == 2:
        print(f"speedup (numpy/numba): kernels x{rows[0][1] / rows[1][1]:.2f}, "
              f"sweep x{rows[0][2] / rows[1][2]:.2f}")


if __name__ == "__main__":
    main()
