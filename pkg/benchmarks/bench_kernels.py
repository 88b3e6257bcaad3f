"""Time the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--particles M] [--dim d] [--repeat r]
"""

import argparse
import timeit

import numpy as np

from gaul import _pycore

try:
    from gaul import _core
except ImportError:
    _core = None


def cases(mod, m, d):
    rng = np.random.default_rng(0)
    state = rng.standard_normal((m, 2 * d))
    grad = rng.standard_normal((m, d))
    z = np.empty((m, 2 * d))
    ones = np.ones(d)
    f = [np.full(d, v) for v in (0.01, 0.0, 0.0, 0.02)]
    s = np.linspace(1.0, 100.0, d)
    return {
        "normals": lambda: mod.normals(7, 0, 3, m, 2 * d),
        "em_update": lambda: mod.em_update(state, grad, z, ones, ones, 2.0, 1e-4, *f,
                                           7, 3, 1, True),
        "rk4_covariance": lambda: mod.rk4_covariance(ones, ones, 0 * ones, ones, ones,
                                                     2.0 * ones, s, 1e-4, 2000, 100),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--particles", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    py = cases(_pycore, args.particles, args.dim)
    cy = cases(_core, args.particles, args.dim) if _core else {}
    print(f"M={args.particles} d={args.dim} (best of {args.repeat})")
    print(f"{'kernel':<16}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, fn in py.items():
        t_py = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        if name in cy:
            t_cy = min(timeit.repeat(cy[name], number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<16}{t_py:>14.2f}{t_cy:>16.2f}{t_py / t_cy:>9.1f}x")
        else:
            print(f"{name:<16}{t_py:>14.2f}{'n/a':>16}{'':>10}")


if __name__ == "__main__":
    main()
