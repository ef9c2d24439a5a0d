"""Time the compiled sampling loops against the pure-Python fallback.

    python benchmarks/bench_samplers.py --samples 20000

Both backends get the same tables and seeds; their outputs are checked for
equality before timings are reported.
"""
import argparse
import random
import time

import numpy as np

from abtree import _pykernels
from abtree.analysis import reversed_kernel
from abtree.graph import kernel_from_rows
from abtree.samplers import csr_tables, start_table

try:
    from abtree import _ckernels
except ImportError:
    _ckernels = None


def complete_kernel(n, seed):
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        w = [0 if i == j else rng.randint(1, 9) for j in range(n)]
        s = sum(w)
        rows.append([f"{x}/{s}" for x in w])
    return kernel_from_rows(rows).to_float()


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return time.perf_counter() - t0, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--sizes", default="3,6,10")
    ap.add_argument("--chain-steps", type=int, default=200000)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'case':<26}{'python s':>10}{'compiled s':>12}{'speedup':>9}")
    for n in (int(x) for x in args.sizes.split(",")):
        M = complete_kernel(n, n)
        R = reversed_kernel(M)
        tables = csr_tables(M)
        rtables = csr_tables(R)
        cases = {
            f"cover n={n}": ("cover_trees", (*tables, n, 0, start_table(M), 7, 0, args.samples, 10**8, False)),
            f"wilson n={n}": ("wilson_trees", (*rtables, n, 0, 7, 0, args.samples, 10**8)),
            f"tree chain n={n}": ("tree_chain_codes", (*rtables, n, np.array([-1] + [0] * (n - 1), dtype=np.int64),
                                                       0, 7, 0, args.chain_steps)),
        }
        for label, (name, call) in cases.items():
            t_py, out_py = timed(getattr(_pykernels, name), *call)
            t_c, out_c = timed(getattr(_ckernels, name), *call)
            flag = "" if same(out_py, out_c) else "  OUTPUTS DIFFER"
            print(f"{label:<26}{t_py:>10.3f}{t_c:>12.4f}{t_py / t_c:>8.0f}x{flag}")


if __name__ == "__main__":
    main()
