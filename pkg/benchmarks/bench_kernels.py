"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--threads 1]

Prints one row per workload with the best wall time of each backend and the
speed-up, after checking that both backends return the same values.
"""

import argparse
import timeit

import numpy as np

from privot.grid import make_uniform_grid
from privot.semidual import fenchel_batch


def workloads():
    rng = np.random.default_rng(0)
    for m, batch, method in ((32, 200, "separable"), (64, 50, "separable"), (16, 20, "brute"), (32, 4, "brute")):
        spec = make_uniform_grid(-0.5, 0.5, m, 2)
        yield f"{method} m={m} batch={batch}", spec, rng.normal(scale=0.3, size=(batch, spec.size)), method


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        from privot import _kernels  # noqa: F401
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'workload':<28}{'cython s':>12}{'python s':>12}{'speed-up':>10}")
    for name, spec, F, method in workloads():
        out = {b: fenchel_batch(F, spec, method, args.threads, backend=b) for b in ("cython", "python")}
        np.testing.assert_allclose(out["cython"], out["python"], rtol=0, atol=1e-12)
        best = {b: min(timeit.repeat(lambda: fenchel_batch(F, spec, method, args.threads, backend=b),
                                     number=1, repeat=args.repeat)) for b in ("cython", "python")}
        print(f"{name:<28}{best['cython']:>12.4f}{best['python']:>12.4f}{best['python'] / best['cython']:>10.1f}x")


if __name__ == "__main__":
    main()
