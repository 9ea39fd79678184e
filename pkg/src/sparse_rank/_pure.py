"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

from collections import deque

import numpy as np


def gf2_rank(rows: np.ndarray, ncols: int) -> int:
    """Rank of bit-packed uint64 rows over GF(2), using Python ints as bitsets."""
    nwords = rows.shape[1]
    work = []
    for row in rows:
        v = 0
        for w in range(nwords - 1, -1, -1):
            v = (v << 64) | int(row[w])
        if v:
            work.append(v)
    rank = 0
    for col in range(ncols):
        if rank == len(work):
            break
        bit = 1 << col
        piv = None
        for r in range(rank, len(work)):
            if work[r] & bit:
                piv = r
                break
        if piv is None:
            continue
        work[rank], work[piv] = work[piv], work[rank]
        pr = work[rank]
        for r in range(rank + 1, len(work)):
            if work[r] & bit:
                work[r] ^= pr
        rank += 1
    return rank


def gfp_rank(a: np.ndarray, p: int) -> int:
    """Rank of a dense int64 matrix over GF(p), p < 2**31; destroys ``a``."""
    nrows, ncols = a.shape
    rank = 0
    for col in range(ncols):
        if rank == nrows:
            break
        nz = np.nonzero(a[rank:, col])[0]
        if len(nz) == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            a[[rank, piv], col:] = a[[piv, rank], col:]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank, col:] = (a[rank, col:] * inv) % p
        below = rank + 1 + np.nonzero(a[rank + 1:, col])[0]
        if len(below):
            f = (p - a[below, col])[:, None]
            a[below, col:] = (a[below, col:] + f * a[rank, col:]) % p
        rank += 1
    return rank


def peel(n_rows, n_cols, col_ptr, col_rows, row_ptr, row_cols):
    """Strip columns of degree <= 1 (with their unique row) to a fixed point.

    Same return value as the compiled kernel, including the generation count.
    """
    col_ptr = col_ptr.tolist()
    col_rows = col_rows.tolist()
    row_ptr = row_ptr.tolist()
    row_cols = row_cols.tolist()
    row_alive = [True] * n_rows
    col_alive = [True] * n_cols
    deg = [col_ptr[v + 1] - col_ptr[v] for v in range(n_cols)]
    gen = [1 if x <= 1 else 0 for x in deg]
    rounds = 0
    queue = deque(v for v in range(n_cols) if deg[v] <= 1)
    order_cols = []
    order_rows = []
    while queue:
        v = queue.popleft()
        if not col_alive[v] or deg[v] > 1:
            continue
        col_alive[v] = False
        rounds = max(rounds, gen[v])
        order_cols.append(v)
        r = -1
        if deg[v] == 1:
            for i in range(col_ptr[v], col_ptr[v + 1]):
                if row_alive[col_rows[i]]:
                    r = col_rows[i]
                    break
        order_rows.append(r)
        if r < 0:
            continue
        row_alive[r] = False
        for j in range(row_ptr[r], row_ptr[r + 1]):
            u = row_cols[j]
            if col_alive[u]:
                deg[u] -= 1
                if deg[u] <= 1:
                    if gen[u] == 0:
                        gen[u] = gen[v] + 1
                    queue.append(u)
    return (
        np.array(row_alive, dtype=bool),
        np.array(col_alive, dtype=bool),
        np.array(order_cols, dtype=np.int64),
        np.array(order_rows, dtype=np.int64),
        rounds,
    )
