# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: dense elimination over GF(2) / GF(p) and worklist peeling.

Signatures mirror :mod:`sparse_rank._pure` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()


cdef inline int64_t _powmod(int64_t base, int64_t exp, int64_t p) nogil:
    cdef int64_t result = 1
    base %= p
    while exp > 0:
        if exp & 1:
            result = (result * base) % p
        base = (base * base) % p
        exp >>= 1
    return result


def gf2_rank(uint64_t[:, ::1] rows, Py_ssize_t ncols):
    """Rank of bit-packed rows over GF(2); destroys ``rows``."""
    cdef Py_ssize_t nrows = rows.shape[0]
    cdef Py_ssize_t nwords = rows.shape[1]
    cdef Py_ssize_t rank = 0, col, r, piv, w, word
    cdef uint64_t bit, tmp
    with nogil:
        for col in range(ncols):
            if rank == nrows:
                break
            word = col >> 6
            bit = (<uint64_t>1) << (col & 63)
            piv = -1
            for r in range(rank, nrows):
                if rows[r, word] & bit:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for w in range(word, nwords):
                    tmp = rows[piv, w]
                    rows[piv, w] = rows[rank, w]
                    rows[rank, w] = tmp
            for r in range(rank + 1, nrows):
                if rows[r, word] & bit:
                    for w in range(word, nwords):
                        rows[r, w] ^= rows[rank, w]
            rank += 1
    return rank


def gfp_rank(int64_t[:, ::1] a, int64_t p):
    """Rank of a dense matrix with entries in [0, p) over GF(p); destroys ``a``.

    Needs p < 2**31 so products fit in 64 bits.
    """
    cdef Py_ssize_t nrows = a.shape[0]
    cdef Py_ssize_t ncols = a.shape[1]
    cdef Py_ssize_t rank = 0, col, r, piv, c
    cdef int64_t inv, f, tmp
    with nogil:
        for col in range(ncols):
            if rank == nrows:
                break
            piv = -1
            for r in range(rank, nrows):
                if a[r, col] != 0:
                    piv = r
                    break
            if piv < 0:
                continue
            if piv != rank:
                for c in range(col, ncols):
                    tmp = a[piv, c]
                    a[piv, c] = a[rank, c]
                    a[rank, c] = tmp
            inv = _powmod(a[rank, col], p - 2, p)
            for c in range(col, ncols):
                a[rank, c] = (a[rank, c] * inv) % p
            for r in range(rank + 1, nrows):
                f = a[r, col]
                if f != 0:
                    f = p - f
                    for c in range(col, ncols):
                        a[r, c] = (a[r, c] + f * a[rank, c]) % p
            rank += 1
    return rank


def peel(Py_ssize_t n_rows, Py_ssize_t n_cols,
         const int64_t[::1] col_ptr, const int64_t[::1] col_rows,
         const int64_t[::1] row_ptr, const int64_t[::1] row_cols):
    """Strip columns of degree <= 1 (with their unique row) to a fixed point.

    Returns ``(row_alive, col_alive, order_cols, order_rows, rounds)``;
    ``order_rows`` holds -1 where a degree-0 column was removed without a row,
    and ``rounds`` is the number of worklist generations.
    """
    row_alive_arr = np.ones(n_rows, dtype=np.uint8)
    col_alive_arr = np.ones(n_cols, dtype=np.uint8)
    deg_arr = np.empty(n_cols, dtype=np.int64)
    queue_arr = np.empty(n_cols + row_cols.shape[0] + 1, dtype=np.int64)
    order_cols_arr = np.empty(n_cols, dtype=np.int64)
    order_rows_arr = np.empty(n_cols, dtype=np.int64)
    gen_arr = np.zeros(n_cols, dtype=np.int64)
    cdef uint8_t[::1] row_alive = row_alive_arr
    cdef uint8_t[::1] col_alive = col_alive_arr
    cdef int64_t[::1] deg = deg_arr
    cdef int64_t[::1] queue = queue_arr
    cdef int64_t[::1] order_cols = order_cols_arr
    cdef int64_t[::1] order_rows = order_rows_arr
    cdef int64_t[::1] gen = gen_arr
    cdef int64_t rounds = 0
    cdef Py_ssize_t head = 0, tail = 0, n_out = 0, v, u, r, i, j
    with nogil:
        for v in range(n_cols):
            deg[v] = col_ptr[v + 1] - col_ptr[v]
            if deg[v] <= 1:
                gen[v] = 1
                queue[tail] = v
                tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            if not col_alive[v] or deg[v] > 1:
                continue
            col_alive[v] = 0
            if gen[v] > rounds:
                rounds = gen[v]
            order_cols[n_out] = v
            r = -1
            if deg[v] == 1:
                for i in range(col_ptr[v], col_ptr[v + 1]):
                    if row_alive[col_rows[i]]:
                        r = col_rows[i]
                        break
            order_rows[n_out] = r
            n_out += 1
            if r < 0:
                continue
            row_alive[r] = 0
            for j in range(row_ptr[r], row_ptr[r + 1]):
                u = row_cols[j]
                if col_alive[u]:
                    deg[u] -= 1
                    if deg[u] <= 1:
                        if gen[u] == 0:
                            gen[u] = gen[v] + 1
                        queue[tail] = u
                        tail += 1
    return row_alive_arr.astype(bool), col_alive_arr.astype(bool), order_cols_arr[:n_out].copy(), order_rows_arr[:n_out].copy(), int(rounds)
