"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--rows 100000] [--repeat 5]

The first numba call (compilation) is excluded from the timings.
"""

import argparse
import timeit

import numpy as np

from terc import _accel
from terc._kernels import KERNELS


def _cases(rows, rng):
    cols = rng.integers(0, 4, size=(rows, 6))
    codes = rng.integers(0, 64, size=rows)
    x = rng.normal(size=rows)
    y = (x > 0).astype(np.float64)
    pred = 0.4 * x + 0.5
    perms = np.stack([rng.permutation(rows) for _ in range(10)])
    return {
        "joint_codes": (cols,),
        "entropy_codes": (codes, 64),
        "quantize": (x, 32),
        "permuted_mse": (pred, y, x, 0.4, perms),
        "permuted_acc": (pred, y, x, 0.4, perms, 0.5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy kernels can run")
    cases = _cases(args.rows, np.random.default_rng(0))
    print(f"{'kernel':<15} {'numba ms':>10} {'numpy ms':>10} {'speed-up':>9}")
    for name, (nb, np_fn) in KERNELS.items():
        call_args = cases[name]
        t_np = min(timeit.repeat(lambda: np_fn(*call_args), number=1, repeat=args.repeat))
        if _accel.NUMBA_AVAILABLE:
            nb(*call_args)  # compile
            t_nb = min(timeit.repeat(lambda: nb(*call_args), number=1, repeat=args.repeat))
            print(f"{name:<15} {t_nb * 1e3:10.2f} {t_np * 1e3:10.2f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:<15} {'-':>10} {t_np * 1e3:10.2f} {'-':>9}")


if __name__ == "__main__":
    main()
