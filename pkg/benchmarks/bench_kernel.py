"""Compare the compiled rewrite kernel against the pure-Python fallback.

Times neighbor expansion and layered BFS over random expressions with both
backends and prints a small table. Run from the repo root:

    python3 benchmarks/bench_kernel.py [--exprs 2000] [--layers 4]
"""

import argparse
import random
import time

from eqsearch import _kernel as pure
from eqsearch import expr as ex

try:
    from eqsearch import _kernel_c as compiled
except ImportError:
    compiled = None


def bench_neighbors(kernel, exprs, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for e in exprs:
            kernel.neighbors(e)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_bfs_layers(kernel, roots, depth, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for root in roots:
            visited = {root}
            frontier = [root]
            for _ in range(depth):
                frontier = kernel.expand_layer(frontier, visited)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--exprs", type=int, default=2000)
    parser.add_argument("--roots", type=int, default=20)
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    exprs = [ex.gen_random_expr((3, 6), rng) for _ in range(args.exprs)]
    roots = [ex.gen_random_expr((4, 5), rng) for _ in range(args.roots)]

    backends = [("pure", pure)]
    if compiled is not None:
        backends.append(("compiled", compiled))
    else:
        print("compiled kernel not built; timing the fallback only")

    results = {}
    for name, kernel in backends:
        tn = bench_neighbors(kernel, exprs)
        tb = bench_bfs_layers(kernel, roots, args.layers)
        results[name] = (tn, tb)
        print(f"{name:>9}: neighbors x{args.exprs} {tn * 1e3:8.1f} ms   "
              f"bfs {args.layers} layers x{args.roots} {tb * 1e3:8.1f} ms")

    if len(results) == 2:
        tn_p, tb_p = results["pure"]
        tn_c, tb_c = results["compiled"]
        print(f" speedup : neighbors {tn_p / tn_c:.2f}x   bfs {tb_p / tb_c:.2f}x")


if __name__ == "__main__":
    main()
