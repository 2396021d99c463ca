"""Time the numba kernels against the numpy fallback on pipeline-sized inputs.

Run from the repository root::

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is checked for agreement between backends before timing. The
first numba call (compilation) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from wristemg.kernels import _numba, _numpy
from wristemg.preprocess import butter_lowpass_sos


def cases(rng):
    sos = butter_lowpass_sos(5.0, 100.0, 2)
    emg = np.abs(rng.normal(size=(40_000, 8)))
    windows = np.cumsum(rng.normal(size=(5_000, 20)), axis=1)
    train = rng.normal(size=(15_000, 11))
    queries = rng.normal(size=(500, 11))
    X = rng.normal(size=(4_000, 11))
    y = X[:, 0] - 0.5 * X[:, 3] + 0.1 * rng.normal(size=4_000)
    return {
        "sos_filter 40k x 8": (lambda m: m.sos_filter(emg, sos, np.zeros((sos.shape[0], 8, 2))),),
        "burg_batch 5k x 20, p=4": (lambda m: m.burg_batch(windows, 4),),
        "knn_search 500 q / 15k, k=10": (lambda m: m.knn_search(train, queries, 10),),
        "best_split 4k x 11": (lambda m: m.best_split(X, y, 10),),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-12)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  agree")
    for name, (call,) in cases(rng).items():
        ref, fast = call(_numpy), call(_numba)  # also triggers compilation
        t_np = best_of(lambda: call(_numpy), args.repeat)
        t_nb = best_of(lambda: call(_numba), args.repeat)
        print(f"{name:32s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}  {agree(ref, fast)}")


if __name__ == "__main__":
    main()
