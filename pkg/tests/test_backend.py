from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import random_dense, rank_by_enumeration
from sparse_rank import _backend
from sparse_rank.linalg import _pack_gf2


def test_selection_default():
    expected = "compiled" if "compiled" in _backend.available_backends() else "pure"
    assert _backend.BACKEND == expected


def test_env_forces_pure():
    env = {**os.environ, "SPARSE_RANK_PURE": "1"}
    out = subprocess.run(
        [sys.executable, "-c", "import sparse_rank; print(sparse_rank.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "pure"


def test_gf2_rank_against_enumeration(kernels, rng):
    for _ in range(40):
        r, c = rng.integers(1, 7, size=2)
        a = random_dense(rng, r, c, 2, 0.5)
        rows, cols = np.nonzero(a)
        packed = _pack_gf2(r, c, rows, cols)
        assert kernels.gf2_rank(packed, c) == rank_by_enumeration(a, 2)


@pytest.mark.parametrize("p", [3, 5, 7])
def test_gfp_rank_against_enumeration(kernels, rng, p):
    for _ in range(30):
        r, c = rng.integers(1, 5, size=2)
        a = random_dense(rng, r, c, p, 0.6)
        assert kernels.gfp_rank(a.astype(np.int64).copy(), p) == rank_by_enumeration(a, p)


def test_gfp_large_prime(kernels):
    p = 2147483629  # below 2**31
    a = np.array([[1, 2], [3, 6 + p]], dtype=np.int64) % p
    assert kernels.gfp_rank(a.copy(), p) == 1
    a[1, 1] = 7
    assert kernels.gfp_rank(a.copy(), p) == 2


def test_backends_identical_peel(rng):
    backends = _backend.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled extension not built")
    from sparse_rank.sampler import sample_ensemble_matrix
    m = sample_ensemble_matrix("d=po:2.8;k=point:3", 5000, rng=rng)
    col_ptr, col_rows = m.csc()
    row_ptr, row_cols = m.csr()
    outs = [b.peel(m.n_rows, m.n_cols, col_ptr, col_rows, row_ptr, row_cols) for b in backends.values()]
    for x, y in zip(*outs):
        np.testing.assert_array_equal(np.asarray(x), np.asarray(y))
