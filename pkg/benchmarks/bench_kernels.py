"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from risae import _kernels_py

try:
    from risae import _ckernels
except ImportError:
    _ckernels = None


def _cases(rng):
    n_ris = 6
    cascade = rng.standard_normal(n_ris) + 1j * rng.standard_normal(n_ris)
    h_d = complex(rng.standard_normal(), rng.standard_normal())
    m = 200_000
    qam = np.array([a + 1j * b for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)]) / np.sqrt(10)
    labels = rng.integers(0, 16, m)
    h = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = h * qam[labels] + 0.1 * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    w = rng.standard_normal((4, 730_000))
    w[3] = np.abs(w[3])
    adam = (0.9, 0.999, 1e-3, 1.0, 1e-8)
    return {
        "exhaustive_search (N=6, 16 levels)": lambda k: k.exhaustive_search(cascade, h_d, 16),
        "ml_detect (16QAM, 200k)": lambda k: k.ml_detect(y, h, qam),
        "ml_detect_errors (16QAM, 200k)": lambda k: k.ml_detect_errors(y, h, qam, labels),
        "adam_step (730k float64)": lambda k: k.adam_step(w[0], w[1], w[2], w[3], *adam),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':40s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, call in cases.items():
        py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:40s} {py:12.2f} {'n/a':>12s} {'n/a':>8s}")
            continue
        cy = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:40s} {py:12.2f} {cy:12.2f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
