"""Time the numba kernels against their numpy counterparts.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--sizes 4,16,64]
"""

import argparse
import timeit

import numpy as np

from twohop_aoi import _accel


def cases(n, rng):
    rx = rng.uniform(0, 500, (n, 3))
    dev = rng.uniform(0, 500, (4 * n, 3))
    hsq = rng.exponential(1e-9, (n, 4))
    zeta = (rng.random((n, 4)) < 0.7).astype(float)
    power = rng.random((n, 4)) * zeta
    return {
        "access_gain_matrix": ((rx, dev, 1e-4),
                               _accel._np_access_gain_matrix, getattr(_accel, "_nb_access_gain_matrix", None)),
        "sic_sinr": ((hsq, power, zeta, 1e-13, False),
                     _accel._np_sic_sinr, getattr(_accel, "_nb_sic_sinr", None)),
    }


def best_of(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--sizes", default="4,16,64")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'n':>5}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, (inputs, np_fn, nb_fn) in cases(n, rng).items():
            t_np = best_of(np_fn, inputs, args.repeat, args.number) * 1e6
            if nb_fn is None:
                print(f"{name:<20}{n:>5}{t_np:>12.2f}{'n/a':>12}{'':>10}")
                continue
            nb_fn(*inputs)  # compile outside the timed region
            t_nb = best_of(nb_fn, inputs, args.repeat, args.number) * 1e6
            print(f"{name:<20}{n:>5}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
