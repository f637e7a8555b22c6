"""Time the per-mode kernels: compiled (numba) against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 16 32] [--repeat 5]

The group application exp(tau L) is what the filtered EMTF stepper calls eight
times per RK4 step, so its cost per grid is the number that matters.
"""
import argparse
import time

import numpy as np

from emtf import _kernels
from emtf.modes import mode_cache
from emtf.plasma import PlasmaParams
from emtf.spectral import GridSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[16, 32])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    params = PlasmaParams()
    rng = np.random.default_rng(0)
    print(f"compiled backend available: {_kernels.HAVE_NUMBA}")
    print(f"{'n':>4} {'kernel':>14} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for n in args.n:
        cache = mode_cache(GridSpec(n), params)
        lam, V = cache.eigen
        Pe = cache.Pe
        x = rng.standard_normal((14, cache.M)) + 1j * rng.standard_normal((14, cache.M))
        cases = {
            "matvec": (lambda: _kernels.batched_matvec_numpy(Pe, x), lambda: _kernels.batched_matvec(Pe, x)),
            "group_apply": (lambda: _kernels.group_apply_numpy(V, lam, 0.37, x),
                            lambda: _kernels.group_apply(V, lam, 0.37, x)),
        }
        for name, (f_np, f_nb) in cases.items():
            f_nb()                       # compile outside the timed region
            assert np.allclose(f_np(), f_nb())
            t_np, t_nb = best_of(f_np, args.repeat), best_of(f_nb, args.repeat)
            print(f"{n:>4} {name:>14} {1e3 * t_np:>11.2f} {1e3 * t_nb:>11.2f} {t_np / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
