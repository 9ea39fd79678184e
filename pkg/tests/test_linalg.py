from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    frozen_by_enumeration,
    is_relation_by_enumeration,
    kernel_by_enumeration,
    proper_count_by_enumeration,
    random_dense,
    rank_by_enumeration,
)
from sparse_rank import linalg as L
from sparse_rank.errors import (
    HypothesisFailed,
    InstanceTooLarge,
    InvalidArgument,
    InvalidSpec,
    UnsupportedField,
)
from sparse_rank.linalg import FieldSpec, SparseMatrix


@st.composite
def small_matrices(draw, max_rows=5, max_cols=5, fields=(2, 3, 5)):
    q = draw(st.sampled_from(fields))
    r = draw(st.integers(0, max_rows))
    c = draw(st.integers(1, max_cols))
    entries = draw(st.lists(st.integers(0, q - 1), min_size=r * c, max_size=r * c))
    dense = np.array(entries, dtype=np.int64).reshape(r, c)
    return SparseMatrix.from_dense(dense, q)


def sparse_random(rng, rows, cols, q, density):
    return SparseMatrix.from_dense(random_dense(rng, rows, cols, q, density), q)


class TestFieldSpec:
    def test_parse(self):
        assert FieldSpec.parse("7") == FieldSpec(7)
        assert FieldSpec.parse(3) == FieldSpec(3)
        r = FieldSpec.parse("rational:p=2147483647")
        assert r.rational and r.q == 2147483647
        assert FieldSpec.parse(r.describe()) == r

    def test_proxy_deterministic(self):
        a, b = FieldSpec.parse("rational:4"), FieldSpec.parse("rational:4")
        assert a == b and a.rational and L.is_prime(a.q) and a.q < 1 << 31

    @pytest.mark.parametrize("text", ["4", "1", "65537", "x", "rational:p=9"])
    def test_rejects(self, text):
        with pytest.raises(InvalidSpec):
            FieldSpec.parse(text)

    def test_is_prime(self):
        primes = [p for p in range(60) if L.is_prime(p)]
        assert primes == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]


class TestSparseMatrix:
    def test_validation(self):
        with pytest.raises(InvalidSpec):
            SparseMatrix(2, 2, [0, 0], [1, 1], [1, 1])
        with pytest.raises(InvalidSpec):
            SparseMatrix(2, 2, [2], [0], [1])
        with pytest.raises(InvalidSpec):
            SparseMatrix(2, 2, [0], [0], [3], FieldSpec(3))
        with pytest.raises(InvalidSpec):
            SparseMatrix(2, 2, [0], [0], [0])

    def test_dense_roundtrip_and_reduction(self):
        a = np.array([[0, 4, 5], [6, 0, 1]])
        m = SparseMatrix.from_dense(a, 5)
        np.testing.assert_array_equal(m.to_dense(), a % 5)
        assert m.nnz == 3

    def test_column_ops(self):
        m = SparseMatrix.from_dense([[1, 0, 1], [0, 1, 1]])
        np.testing.assert_array_equal(m.delete_columns({1}).to_dense(), [[1, 1], [0, 1]])
        np.testing.assert_array_equal(m.zero_columns({2}).to_dense(), [[1, 0, 0], [0, 1, 0]])
        assert m.nonzero_columns() == {0, 1, 2}
        assert m.transpose().transpose() == m

    def test_vstack_field_mismatch(self):
        with pytest.raises(InvalidArgument):
            SparseMatrix.identity(2, 2).vstack(SparseMatrix.identity(2, 3))


class TestRank:
    @settings(max_examples=300, deadline=None)
    @given(small_matrices())
    def test_against_enumeration(self, m):
        ref = rank_by_enumeration(m.to_dense(), m.q)
        assert L.rank(m) == ref
        assert L.rank(m, use_peeling=False) == ref
        assert L.rank(m.transpose()) == ref
        assert L.rank(m) + L.nullity(m) == m.n_cols

    @pytest.mark.parametrize("q", [2, 3, 7])
    def test_peeling_matches_dense(self, kernels, q):
        rng = np.random.default_rng(q)
        for _ in range(20):
            rows, cols = rng.integers(5, 80, size=2)
            m = sparse_random(rng, rows, cols, q, 3 / cols)
            dense = L.rank(m, use_peeling=False, kernels=kernels)
            assert L.rank(m, use_peeling=True, kernels=kernels) == dense
            assert L.rank(m.transpose(), kernels=kernels) == dense

    def test_backends_agree_large(self, kernels):
        rng = np.random.default_rng(1)
        m = sparse_random(rng, 300, 400, 2, 0.01)
        assert L.rank(m, kernels=kernels) == L.rank(m, use_peeling=False, kernels=kernels)

    def test_word_boundaries(self, kernels):
        for n in (63, 64, 65, 128, 129):
            assert L.rank(SparseMatrix.identity(n), use_peeling=False, kernels=kernels) == n
            ones = SparseMatrix.from_dense(np.ones((3, n), dtype=np.int64))
            assert L.rank(ones, use_peeling=False, kernels=kernels) == 1

    def test_edge_shapes(self):
        assert L.rank(SparseMatrix.zeros(0, 5)) == 0
        assert L.rank(SparseMatrix.zeros(4, 0)) == 0
        assert L.nullity(SparseMatrix.zeros(3, 5)) == 5

    @settings(max_examples=100, deadline=None)
    @given(small_matrices(), st.data())
    def test_append_row_changes_rank_by_at_most_one(self, m, data):
        row = data.draw(st.lists(st.integers(0, m.q - 1), min_size=m.n_cols, max_size=m.n_cols))
        extra = SparseMatrix.from_dense([row], m.q)
        diff = L.rank(m.vstack(extra)) - L.rank(m)
        assert diff in (0, 1)

    def test_rational_exact(self):
        a = np.array([[2, 4], [1, 2], [3, 1]])
        m = SparseMatrix.from_dense(a, "rational")
        assert L.rank_rational_exact(m) == 2
        assert L.rank(m) == 2
        # singular only modulo 3
        m3 = SparseMatrix.from_dense([[1, 1], [1, 4]], FieldSpec(3, rational=True))
        assert L.rank_rational_exact(m3) == 2
        assert L.rank(m3) == 1

    def test_rational_proxy_matches_exact(self, rng):
        for _ in range(20):
            a = random_dense(rng, 12, 15, 7, 0.3) - 3 * random_dense(rng, 12, 15, 5, 0.2)
            m = SparseMatrix.from_dense(a, "rational:1")
            assert L.rank(m) == L.rank_rational_exact(m) == np.linalg.matrix_rank(a)

    def test_rational_exact_limit(self):
        with pytest.raises(InstanceTooLarge):
            L.rank_rational_exact(SparseMatrix.zeros(201, 1, "rational"))


class TestKernel:
    @settings(max_examples=150, deadline=None)
    @given(small_matrices())
    def test_kernel_against_enumeration(self, m):
        q = m.q
        basis = L.kernel_basis(m)
        assert basis.shape == (m.n_cols - L.rank(m), m.n_cols)
        assert not np.any((m.to_dense() @ basis.T) % q)
        ref = kernel_by_enumeration(m.to_dense(), q)
        assert len(ref) == q ** basis.shape[0]

    @settings(max_examples=150, deadline=None)
    @given(small_matrices())
    def test_frozen_against_enumeration(self, m):
        assert L.frozen_set(m) == frozen_by_enumeration(m.to_dense(), m.q)

    def test_frozen_rational(self):
        m = SparseMatrix.from_dense([[1, 0, 0], [0, 2, 2]], "rational")
        assert L.frozen_set(m) == {0}

    def test_kernel_rational_unsupported(self):
        with pytest.raises(UnsupportedField):
            L.kernel_basis(SparseMatrix.identity(2, "rational"))


class TestRelations:
    @settings(max_examples=100, deadline=None)
    @given(small_matrices(max_cols=4), st.data())
    def test_relation_against_enumeration(self, m, data):
        I = data.draw(st.sets(st.integers(0, m.n_cols - 1), min_size=1))
        assert L.is_relation(m, I) == is_relation_by_enumeration(m.to_dense(), m.q, I)

    @settings(max_examples=100, deadline=None)
    @given(small_matrices(max_cols=5), st.integers(1, 3))
    def test_proper_count_against_enumeration(self, m, ell):
        ref = proper_count_by_enumeration(m.to_dense(), m.q, ell)
        assert L.count_proper_relations(m, ell) == ref
        brute = sum(L.is_proper_relation(m, I).is_proper for I in itertools.combinations(range(m.n_cols), ell))
        assert brute == ref

    def test_proper_relation_examples(self):
        # x0 frozen; {1, 2} tied by a row; {0, 3} touches only the frozen column
        m = SparseMatrix.from_dense([[1, 0, 0, 0], [0, 1, 1, 0]])
        rep = L.is_proper_relation(m, {0, 3})
        assert rep.is_relation and not rep.is_proper and rep.frozen_overlap == {0}
        assert L.is_proper_relation(m, {1, 2}).is_proper
        assert L.count_proper_relations(m, 2) == 1

    def test_rational_count(self):
        m = SparseMatrix.from_dense([[1, 0, 0, 0], [0, 1, 1, 0]], "rational")
        assert L.count_proper_relations(m, 2) == 1

    def test_errors(self):
        m = SparseMatrix.identity(3)
        with pytest.raises(InvalidArgument):
            L.is_relation(m, set())
        with pytest.raises(InvalidArgument):
            L.is_relation(m, {5})
        with pytest.raises(InvalidArgument):
            L.count_proper_relations(m, 0)
        with pytest.raises(InstanceTooLarge):
            L.count_proper_relations(SparseMatrix.zeros(1, 200), 3, cap=1000)


class TestPin:
    def test_shape_and_rows(self, rng):
        m = sparse_random(rng, 10, 30, 3, 0.1)
        p = L.pin(m, 7, rng)
        assert p.shape == (17, 30)
        extra = p.to_dense()[10:]
        assert np.all((extra != 0).sum(axis=1) == 1) and np.all(extra[extra != 0] == 1)
        assert L.pin(m, 0, rng) is m

    def test_restricted_columns(self, rng):
        p = L.pin(SparseMatrix.zeros(0, 10), 50, rng, columns=[2, 5])
        assert p.nonzero_columns() <= {2, 5}

    def test_errors(self, rng):
        with pytest.raises(InvalidArgument):
            L.pin(SparseMatrix.zeros(1, 0), 1, rng)
        with pytest.raises(InvalidArgument):
            L.pin(SparseMatrix.identity(2), -1, rng)

    @pytest.mark.parametrize("q", [2, 5])
    def test_monotone(self, q):
        rng = np.random.default_rng(q)
        m = sparse_random(rng, 15, 40, q, 0.08)
        prev_null, prev_frozen = L.nullity(m), L.frozen_set(m)
        cur = m
        for theta in range(1, 30):
            cur = L.pin(cur, 1, rng)
            null, frozen = L.nullity(cur), L.frozen_set(cur)
            assert null <= prev_null and prev_null - null <= 1
            assert prev_frozen <= frozen
            prev_null, prev_frozen = null, frozen
        assert L.nullity(m) - L.nullity(cur) <= 29


class TestLemma:
    def test_nullity_delta_random(self, rng):
        checked = 0
        for _ in range(200):
            q = int(rng.choice([2, 3]))
            A = sparse_random(rng, 4, 6, q, 0.35)
            B = sparse_random(rng, 2, 6, q, 0.2)
            C = sparse_random(rng, 2, 2, q, 0.5)
            try:
                lhs, rhs = L.nullity_delta_lemma_check(A, B, C)
            except HypothesisFailed:
                continue
            assert lhs == rhs
            checked += 1
        assert checked > 50

    def test_hypothesis_failure(self):
        A = SparseMatrix.from_dense([[1, 1, 0]])
        B = SparseMatrix.from_dense([[1, 1, 0]])
        with pytest.raises(HypothesisFailed):
            L.nullity_delta_lemma_check(A, B)

    def test_frozen_columns_zeroed(self):
        A = SparseMatrix.from_dense([[1, 0, 0]])
        B = SparseMatrix.from_dense([[1, 1, 0]])
        lhs, rhs = L.nullity_delta_lemma_check(A, B)
        assert lhs == rhs == -1


class TestSparseFormat:
    @settings(max_examples=50, deadline=None)
    @given(small_matrices(fields=(2, 3, 7)))
    def test_roundtrip(self, m):
        assert L.read_sparse(L.write_sparse(m)) == m

    def test_rational_roundtrip(self):
        m = SparseMatrix.from_dense([[5, -3], [0, 7]], "rational:2")
        back = L.read_sparse(L.write_sparse(m))
        assert back == m and back.field.rational

    def test_comments_and_blank_lines(self):
        m = L.read_sparse("# header next\nSPARSE 2 2 3\n\n0 1 2  # entry\n1 0 1\n")
        np.testing.assert_array_equal(m.to_dense(), [[0, 2], [1, 0]])

    @pytest.mark.parametrize("text", [
        "", "SPARSE 2 2\n", "DENSE 2 2 2\n", "SPARSE 2 2 2\n0 0\n", "SPARSE 2 2 2\n0 5 1\n",
        "SPARSE 2 2 4\n", "SPARSE 2 2 2\n0 0 1\n0 0 1\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(InvalidSpec):
            L.read_sparse(text)
