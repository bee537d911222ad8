"""Compiled vs pure-Python master-equation kernel.

Run with ``python3 benchmarks/bench_kernels.py [--repeat 5]``. Prints one row
per case: Liouville-space dimension, best wall time per backend, speedup and
the max deviation between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lossylie import kernels
from lossylie.fock import FockBasis, fock_state
from lossylie.liouville import Schedule, SystemParams, liouvillian_generators, vectorize

CASES = {
    "2 modes, N_p=2, constant": (
        SystemParams.from_values([0.3, -0.2], [0.7, 0.1], [1.0]),
        FockBasis(2, 2),
    ),
    "2 modes, N_p=2, kappa ramp": (
        SystemParams(2, (0.0, 0.0), (1.0, 0.0), (Schedule((0.0, 3.0), (1.0, 1.5)),)),
        FockBasis(2, 2),
    ),
    "3 modes, N_p=2, ramp": (
        SystemParams(
            3,
            (0.0, 0.2, -0.1),
            (Schedule((0.0, 2.0), (0.1, 0.6)), 0.0, 0.3),
            (1.0, Schedule((0.0, 1.0, 3.0), (0.5, 1.0, 0.8))),
        ),
        FockBasis(3, 2),
    ),
    "2 modes, N_p=4, ramp": (
        SystemParams(2, (0.0, 0.0), (1.0, 0.0), (Schedule((0.0, 3.0), (1.0, 1.5)),)),
        FockBasis(2, 4),
    ),
}


def run_case(params, basis, backend, t_eval):
    gens = liouvillian_generators(params.n_modes, basis)
    n = basis.n_modes
    occ = (1,) * n if basis.max_total >= n else (1,) + (0,) * (n - 1)
    y0 = vectorize(fock_state(basis, occ))
    out, stats = kernels.integrate_affine(
        gens, params.schedules, y0, t_eval, rtol=1e-9, atol=1e-12, max_steps=200_000, backend=backend
    )
    return out, stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--t-final", type=float, default=3.0)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"available backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled extension not built; nothing to compare")
        return
    t_eval = np.linspace(0.0, args.t_final, 61)
    print(f"{'case':32s} {'dim':>5s} {'cython [s]':>11s} {'python [s]':>11s} {'speedup':>8s} {'max dev':>9s}")
    for name, (params, basis) in CASES.items():
        times, outs = {}, {}
        for b in ("cython", "python"):
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                outs[b], _ = run_case(params, basis, b, t_eval)
                best = min(best, time.perf_counter() - t0)
            times[b] = best
        dev = float(np.abs(outs["cython"] - outs["python"]).max())
        print(
            f"{name:32s} {basis.dim**2:5d} {times['cython']:11.4f} {times['python']:11.4f} "
            f"{times['python'] / times['cython']:8.1f} {dev:9.1e}"
        )


if __name__ == "__main__":
    main()
