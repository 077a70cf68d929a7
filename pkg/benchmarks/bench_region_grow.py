"""Compare the compiled and pure-Python region-growing kernels.

Usage: python benchmarks/bench_region_grow.py [--repeat N]

Times ``detect_segments`` on synthetic space-time images of a few sizes with
each backend and reports the speed-up.  Both backends must return the same
segments; the script checks that before timing.
"""
import argparse
import math
import time

import numpy as np

from hydrostat import _regiongrow_py, stiv
from hydrostat.synth import SceneSpec, gen_frames
from hydrostat.stiv import SearchLine, build_sti, detect_segments

try:
    from hydrostat import _regiongrow
except ImportError:
    _regiongrow = None


def make_sti(n_t, length, seed=0):
    seq, _ = gen_frames(SceneSpec(T=n_t, H=1, W=length + n_t + 16, velocity=0.5, noise=3.0, seed=seed))
    return build_sti(seq, SearchLine((8.0, 0.0), (1.0, 0.0), length))


def timed(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _regiongrow is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    kernels = {"cython": _regiongrow.region_grow, "python": _regiongrow_py.region_grow}
    print(f"{'STI size':>12} {'cython [ms]':>12} {'python [ms]':>12} {'speed-up':>9}")
    for n_t, length in [(48, 64), (100, 64), (200, 128), (400, 256)]:
        sti = make_sti(n_t, length)
        times = {}
        results = {}
        for name, kernel in kernels.items():
            stiv._kernels.region_grow = kernel
            results[name] = detect_segments(sti)
            times[name] = timed(lambda: detect_segments(sti), args.repeat)
        assert results["cython"] == results["python"], "backends disagree"
        print(
            f"{f'{n_t}x{length}':>12} {1e3 * times['cython']:12.2f} {1e3 * times['python']:12.2f} "
            f"{times['python'] / times['cython']:8.1f}x"
        )


if __name__ == "__main__":
    main()
