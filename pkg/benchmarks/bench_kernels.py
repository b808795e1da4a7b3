"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once per backend before timing so JIT compilation is
excluded. Results from both backends are checked for agreement.
"""

import argparse
import time

import numpy as np

from dfw import _kernels


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _parts(result):
    return [np.asarray(r) for r in result] if isinstance(result, tuple) else [np.asarray(result)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    levels = np.round(np.arange(1, 10) / 10, 12)
    x1, x2 = np.sort(rng.normal(size=20000)), np.sort(rng.normal(0.2, 1.0, size=15000))
    w1, w2 = rng.random(20000), rng.random(15000)
    a = rng.normal(size=(1500, 7))

    cases = {
        "cv_tuples 9^6": lambda: _kernels.cv_tuples(levels, 6),
        "ks_sorted 20k x 15k": lambda: _kernels.ks_sorted(x1, w1, x2, w2),
        "rbf_gram 1500 x 1500": lambda: _kernels.rbf_gram(a, a, 0.1),
    }
    print(f"{'kernel':24s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}  max|diff|")
    for name, fn in cases.items():
        out = {}
        timing = {}
        for backend in ("numpy", "numba"):
            _kernels.set_backend(backend)
            timing[backend] = _best(fn, args.repeat)
            out[backend] = fn()
        pairs = zip(_parts(out["numpy"]), _parts(out["numba"]))
        diff = max(float(np.max(np.abs(p - q))) for p, q in pairs)
        print(f"{name:24s} {timing['numpy']:10.4f} {timing['numba']:10.4f} "
              f"{timing['numpy'] / timing['numba']:8.1f}  {diff:.2e}")


if __name__ == "__main__":
    main()
