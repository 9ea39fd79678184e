"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 2000] [--repeat 3]

Both backends get identical inputs; results are also checked for equality.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sparse_rank import linalg
from sparse_rank._backend import available_backends
from sparse_rank.linalg import _pack_gf2
from sparse_rank.sampler import sample_ensemble_matrix


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--dense", type=int, default=400, help="side of the dense elimination inputs")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    sparse = sample_ensemble_matrix("d=po:2.5;k=po:2.5", args.n, 2, "ones", rng)
    col_ptr, col_rows = sparse.csc()
    row_ptr, row_cols = sparse.csr()
    s = args.dense
    bits = (rng.random((s, s)) < 0.5).astype(np.int64)
    r, c = np.nonzero(bits)
    packed = _pack_gf2(s, s, r, c)
    modp = rng.integers(0, 7, size=(s, s), dtype=np.int64)

    cases = {
        "peel": lambda k: k.peel(sparse.n_rows, sparse.n_cols, col_ptr, col_rows, row_ptr, row_cols)[1].sum(),
        f"gf2_rank {s}x{s}": lambda k: k.gf2_rank(packed.copy(), s),
        f"gfp_rank {s}x{s} p=7": lambda k: k.gfp_rank(modp.copy(), 7),
        f"rank n={args.n} (peel + core)": lambda k: linalg.rank(sparse, kernels=k),
    }
    backends = available_backends()
    print(f"{'case':<32}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times, outs = {}, {}
        for name, kern in backends.items():
            times[name], outs[name] = best_of(lambda: fn(kern), args.repeat)
        if len({int(v) for v in outs.values()}) != 1:
            raise SystemExit(f"backends disagree on {label}: {outs}")
        speed = times["pure"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<32}" + "".join(f"{times[nm] * 1e3:>12.2f}ms" for nm in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
