"""Time the global linear attention block as the number of nodes grows.

The keys and values are contracted into a small channel-by-channel summary
before the queries touch them, so the cost grows linearly with the node
count. A least-squares line through the timings shows this directly.
"""
import argparse
import time

import numpy as np

from gola import attention
from gola.autodiff import ParamStore


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--channels", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    store = ParamStore()
    attention.init_attention(store, "at", np.random.default_rng(0), args.channels, 4, 16)
    sizes = np.array([1000, 2000, 4000, 8000])
    times = []
    for n in sizes:
        h = np.random.default_rng(1).normal(size=(n, args.channels))
        best = np.inf
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            attention.multi_head(h, store, "at")
            best = min(best, time.perf_counter() - t0)
        times.append(best)
        print(f"N = {n:5d}: {1e3 * best:7.2f} ms")
    slope, icpt = np.polyfit(sizes, times, 1)
    fit = slope * sizes + icpt
    r2 = 1 - ((times - fit) ** 2).sum() / ((times - np.mean(times)) ** 2).sum()
    print(f"linear fit R^2 = {r2:.4f}")


if __name__ == "__main__":
    main()
