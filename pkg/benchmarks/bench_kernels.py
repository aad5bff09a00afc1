"""Time the numba and numpy kernel paths side by side.

    python3 benchmarks/bench_kernels.py [--batch 1120] [--repeat 5]
"""

import argparse
import math
import time

import numpy as np

from indisim import _kernels
from indisim.core import random_density_matrix
from indisim.protocol import output_state
from indisim.tomography import BASES, simulate_counts


def best_of(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def tomography_batch(n, counts):
    rng = np.random.default_rng(0)
    proj = np.concatenate([BASES[b].projectors for b in "ZXY"])
    w = np.empty((n, 6))
    for k in range(n):
        rho = output_state(rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1))
        w[k] = [c for r in simulate_counts(rho, counts, seed=k) for c in r.counts]
    return proj, w


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=1120, help="reconstructions per call (16 delays x 7 phases x 10)")
    ap.add_argument("--counts", type=float, default=1e6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if _kernels.numba_impl is None:
        raise SystemExit("numba path is disabled; unset INDISIM_DISABLE_NUMBA")
    impls = {"numba": _kernels.numba_impl, "numpy": _kernels.numpy_impl}

    proj, w = tomography_batch(args.batch, args.counts)
    rho8 = random_density_matrix(64, np.random.default_rng(1))
    amps = np.exp(1j * np.linspace(0, 40, 4096))
    empty = np.empty((args.batch, 0))

    cases = {
        f"rrr_batch ({args.batch} states)": lambda k: k.rrr_batch(proj, w, 10_000, 1e-10, empty),
        "flip_trace (d=8)": lambda k: k.flip_trace(rho8, 8),
        "mirror_overlap (4096 bins)": lambda k: k.mirror_overlap(amps),
    }
    print(f"{'kernel':<30}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, call in cases.items():
        t = {label: best_of(lambda k=k: call(k), args.repeat) for label, k in impls.items()}
        print(f"{name:<30}{1e3 * t['numba']:>12.3f}{1e3 * t['numpy']:>12.3f}{t['numpy'] / t['numba']:>10.1f}")

    a = impls["numba"].rrr_batch(proj, w, 10_000, 1e-10, empty)
    b = impls["numpy"].rrr_batch(proj, w, 10_000, 1e-10, empty)
    print(f"max |rho_numba - rho_numpy| = {np.max(np.abs(a[0] - b[0])):.2e}; identical iteration counts: {np.array_equal(a[2], b[2])}")


if __name__ == "__main__":
    main()
