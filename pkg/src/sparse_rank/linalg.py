"""Exact linear algebra over prime fields for sparse matrices in triplet form.

Rank uses peeling first: a column with a single nonzero entry makes its row
pivotal, so both are removed and the rank grows by one; the residual (the
2-core of the Tanner graph) goes to dense elimination. Over GF(2) the residual
rows are bit-packed into 64-bit words.

"Characteristic 0" is handled by a proxy: integer matrices are reduced modulo
one random prime near 2**31. That rank never exceeds the rational rank and
equals it unless the prime divides a nonzero maximal minor; ``rank_rational_exact``
gives the exact value through fraction-free elimination for small matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (
    HypothesisFailed,
    InstanceTooLarge,
    InvalidArgument,
    InvalidSpec,
    UnsupportedField,
)

MAX_PRIME = 1 << 16
RATIONAL_EXACT_LIMIT = 200


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """A prime field GF(q), or the rational proxy working modulo ``q``."""

    q: int
    rational: bool = False

    def __post_init__(self):
        if not is_prime(self.q):
            raise InvalidSpec(f"q={self.q} is not prime")
        if not self.rational and self.q >= MAX_PRIME:
            raise InvalidSpec(f"prime fields need q < 2**16, got {self.q}")
        if self.rational and self.q >= 1 << 31:
            raise InvalidSpec("rational proxy prime must stay below 2**31")

    @classmethod
    def rational_proxy(cls, seed: int = 0) -> "FieldSpec":
        rng = np.random.default_rng(seed)
        p = int(rng.integers((1 << 31) - (1 << 24), 1 << 31))
        p |= 1
        while not is_prime(p):
            p -= 2
        return cls(p, rational=True)

    @classmethod
    def parse(cls, text) -> "FieldSpec":
        if isinstance(text, FieldSpec):
            return text
        if isinstance(text, int):
            return cls(text)
        text = str(text).strip().lower()
        if text.startswith(("rational", "q0", "char0")):
            _, _, arg = text.partition(":")
            if arg.startswith("p="):
                return cls(int(arg[2:]), rational=True)
            return cls.rational_proxy(int(arg) if arg else 0)
        try:
            return cls(int(text))
        except ValueError as exc:
            raise InvalidSpec(f"bad field {text!r}") from exc

    def describe(self) -> str:
        return f"rational:p={self.q}" if self.rational else str(self.q)


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Matrix in triplet form; values are nonzero field elements.

    Over the rational proxy values are arbitrary nonzero integers.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    field: FieldSpec = field(default_factory=lambda: FieldSpec(2))

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=np.int64).ravel()
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)
        if not (len(rows) == len(cols) == len(vals)):
            raise InvalidSpec("triplet arrays differ in length")
        if self.n_rows < 0 or self.n_cols < 0:
            raise InvalidSpec("negative dimension")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.n_rows or cols.min() < 0 or cols.max() >= self.n_cols:
                raise InvalidSpec("entry index out of range")
            if self.field.rational:
                if np.any(vals == 0):
                    raise InvalidSpec("zero value stored")
            elif np.any(vals <= 0) or np.any(vals >= self.field.q):
                raise InvalidSpec(f"values must lie in [1, {self.field.q - 1}]")
            keys = rows * max(self.n_cols, 1) + cols
            if len(np.unique(keys)) != len(keys):
                raise InvalidSpec("duplicate (row, col) entry")

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def q(self) -> int:
        return self.field.q

    @classmethod
    def from_dense(cls, dense, field=2) -> "SparseMatrix":
        fs = FieldSpec.parse(field)
        a = np.asarray(dense, dtype=np.int64)
        if a.ndim != 2:
            raise InvalidSpec("dense input must be two-dimensional")
        if not fs.rational:
            a = a % fs.q
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c], fs)

    @classmethod
    def identity(cls, n: int, field=2) -> "SparseMatrix":
        idx = np.arange(n)
        return cls(n, n, idx, idx, np.ones(n, dtype=np.int64), FieldSpec.parse(field))

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int, field=2) -> "SparseMatrix":
        e = np.zeros(0, dtype=np.int64)
        return cls(n_rows, n_cols, e, e, e, FieldSpec.parse(field))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols), dtype=np.int64)
        a[self.rows, self.cols] = self.vals
        return a

    def reduced_vals(self) -> np.ndarray:
        return self.vals % self.field.q

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.n_cols, self.n_rows, self.cols, self.rows, self.vals, self.field)

    def vstack(self, other: "SparseMatrix") -> "SparseMatrix":
        if other.n_cols != self.n_cols or other.field != self.field:
            raise InvalidArgument("vstack needs equal column counts and fields")
        return SparseMatrix(
            self.n_rows + other.n_rows,
            self.n_cols,
            np.concatenate([self.rows, other.rows + self.n_rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, other.vals]),
            self.field,
        )

    def delete_columns(self, cols) -> "SparseMatrix":
        drop = np.zeros(self.n_cols, dtype=bool)
        drop[list(cols)] = True
        keep = ~drop[self.cols]
        remap = np.cumsum(~drop) - 1
        return SparseMatrix(
            self.n_rows, int((~drop).sum()), self.rows[keep], remap[self.cols[keep]], self.vals[keep], self.field
        )

    def zero_columns(self, cols) -> "SparseMatrix":
        drop = np.zeros(self.n_cols, dtype=bool)
        drop[list(cols)] = True
        keep = ~drop[self.cols]
        return SparseMatrix(self.n_rows, self.n_cols, self.rows[keep], self.cols[keep], self.vals[keep], self.field)

    def nonzero_columns(self) -> set[int]:
        return set(np.unique(self.cols).tolist())

    def csc(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.lexsort((self.rows, self.cols))
        ptr = np.zeros(self.n_cols + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.cols, minlength=self.n_cols), out=ptr[1:])
        return ptr, np.ascontiguousarray(self.rows[order])

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.lexsort((self.cols, self.rows))
        ptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.rows, minlength=self.n_rows), out=ptr[1:])
        return ptr, np.ascontiguousarray(self.cols[order])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.field == other.field
            and np.array_equal(self.to_dense(), other.to_dense())
        )

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz}, q={self.field.describe()})"


@dataclass(frozen=True)
class RelationReport:
    target_set: frozenset
    is_relation: bool
    is_proper: bool
    frozen_overlap: frozenset


# ---------------------------------------------------------------------------
# rank


def _pack_gf2(n_rows: int, n_cols: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    nwords = max((n_cols + 63) // 64, 1)
    packed = np.zeros((n_rows, nwords), dtype=np.uint64)
    if len(rows):
        bits = np.left_shift(np.uint64(1), (cols & 63).astype(np.uint64))
        np.bitwise_or.at(packed, (rows, cols >> 6), bits)
    return packed


def _dense_rank_triplets(n_rows, n_cols, rows, cols, vals, p, kernels=None) -> int:
    k = kernels or _backend.kernels
    if n_rows == 0 or n_cols == 0 or len(rows) == 0:
        return 0
    if p == 2:
        return int(k.gf2_rank(_pack_gf2(n_rows, n_cols, rows, cols), n_cols))
    a = np.zeros((n_rows, n_cols), dtype=np.int64)
    a[rows, cols] = vals % p
    return int(k.gfp_rank(a, p))


def peel_matrix(m: SparseMatrix, kernels=None):
    """Run column peeling; returns ``(row_alive, col_alive, order_cols, order_rows, rounds)``."""
    k = kernels or _backend.kernels
    col_ptr, col_rows = m.csc()
    row_ptr, row_cols = m.csr()
    return k.peel(m.n_rows, m.n_cols, col_ptr, col_rows, row_ptr, row_cols)


def rank(m: SparseMatrix, use_peeling: bool = True, kernels=None) -> int:
    """Exact rank over the matrix field (modulo the proxy prime for rationals)."""
    p = m.field.q
    if not use_peeling:
        return _dense_rank_triplets(m.n_rows, m.n_cols, m.rows, m.cols, m.vals, p, kernels)
    row_alive, col_alive, _, order_rows, _ = peel_matrix(m, kernels)
    peeled = int(np.count_nonzero(order_rows >= 0))
    keep = row_alive[m.rows] & col_alive[m.cols]
    if not np.any(keep):
        return peeled
    r_live = np.nonzero(row_alive)[0]
    c_live = np.nonzero(col_alive)[0]
    r_map = np.full(m.n_rows, -1, dtype=np.int64)
    c_map = np.full(m.n_cols, -1, dtype=np.int64)
    r_map[r_live] = np.arange(len(r_live))
    c_map[c_live] = np.arange(len(c_live))
    rr = r_map[m.rows[keep]]
    cc = c_map[m.cols[keep]]
    # rows left empty inside the core contribute nothing
    used = np.unique(rr)
    compact = np.full(len(r_live), -1, dtype=np.int64)
    compact[used] = np.arange(len(used))
    return peeled + _dense_rank_triplets(len(used), len(c_live), compact[rr], cc, m.vals[keep], p, kernels)


def nullity(m: SparseMatrix, use_peeling: bool = True) -> int:
    return m.n_cols - rank(m, use_peeling)


def rank_rational_exact(m: SparseMatrix) -> int:
    """Rank over Q by fraction-free (Bareiss) elimination on the integer entries."""
    if max(m.n_rows, m.n_cols) > RATIONAL_EXACT_LIMIT:
        raise InstanceTooLarge(f"exact rational path limited to {RATIONAL_EXACT_LIMIT} rows/columns")
    a = [[0] * m.n_cols for _ in range(m.n_rows)]
    for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.vals.tolist()):
        a[r][c] = v
    rank_ = 0
    prev = 1
    for col in range(m.n_cols):
        piv = next((r for r in range(rank_, m.n_rows) if a[r][col] != 0), None)
        if piv is None:
            continue
        a[rank_], a[piv] = a[piv], a[rank_]
        pr = a[rank_]
        for r in range(rank_ + 1, m.n_rows):
            row = a[r]
            f = row[col]
            for c in range(col + 1, m.n_cols):
                row[c] = (pr[col] * row[c] - f * pr[c]) // prev
            row[col] = 0
        prev = pr[col]
        rank_ += 1
        if rank_ == m.n_rows:
            break
    return rank_


# ---------------------------------------------------------------------------
# kernel and relations


def rref_mod_p(a: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(p); pivots chosen first-nonzero by column."""
    a = np.array(a, dtype=np.int64) % p
    nrows, ncols = a.shape
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        if r == nrows:
            break
        nz = np.nonzero(a[r:, col])[0]
        if len(nz) == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            a[[r, piv]] = a[[piv, r]]
        a[r] = (a[r] * pow(int(a[r, col]), p - 2, p)) % p
        others = np.nonzero(a[:, col])[0]
        others = others[others != r]
        if len(others):
            a[others] = (a[others] - a[others, col][:, None] * a[r]) % p
        pivots.append(col)
        r += 1
    return a[:r], pivots


def _require_finite(m: SparseMatrix, what: str) -> None:
    if m.field.rational:
        raise UnsupportedField(f"{what} needs a finite field, not the rational proxy")


def kernel_basis(m: SparseMatrix) -> np.ndarray:
    """Basis of the right kernel as the rows of an (nullity x n_cols) array."""
    _require_finite(m, "kernel_basis")
    p = m.field.q
    rref, pivots = rref_mod_p(m.to_dense(), p)
    free = [c for c in range(m.n_cols) if c not in set(pivots)]
    basis = np.zeros((len(free), m.n_cols), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for j, pc in enumerate(pivots):
            basis[i, pc] = (-rref[j, f]) % p
    return basis


def frozen_set(m: SparseMatrix) -> set[int]:
    """Columns on which every kernel vector vanishes."""
    if m.field.rational:
        base = rank(m)
        out = set()
        for i in range(m.n_cols):
            unit = SparseMatrix(1, m.n_cols, [0], [i], [1], m.field)
            if rank(m.vstack(unit)) == base:
                out.add(i)
        return out
    basis = kernel_basis(m)
    if basis.shape[0] == 0:
        return set(range(m.n_cols))
    return set(np.nonzero(~np.any(basis != 0, axis=0))[0].tolist())


def _check_index_set(m: SparseMatrix, I) -> frozenset:
    s = frozenset(int(i) for i in I)
    if not s:
        raise InvalidArgument("index set must be nonempty")
    if min(s) < 0 or max(s) >= m.n_cols:
        raise InvalidArgument("column index out of range")
    return s


def is_relation(m: SparseMatrix, I) -> bool:
    """Whether some row combination has nonempty support inside ``I``."""
    s = _check_index_set(m, I)
    return rank(m) > rank(m.delete_columns(s))


def is_proper_relation(m: SparseMatrix, I, frozen: set[int] | None = None) -> RelationReport:
    s = _check_index_set(m, I)
    fz = frozen_set(m) if frozen is None else frozen
    residue = s - fz
    rel = is_relation(m, s)
    proper = bool(residue) and is_relation(m, residue)
    return RelationReport(s, rel, proper, frozenset(s & fz))


def count_proper_relations(m: SparseMatrix, ell: int, cap: int = 2_000_000) -> int:
    """Number of ``ell``-subsets of columns that are proper relations.

    Uses the kernel basis: a set J of columns is a relation exactly when the
    rows of the basis matrix indexed by J are linearly dependent.
    """
    if ell < 1:
        raise InvalidArgument("ell must be at least 1")
    total = math.comb(m.n_cols, ell)
    if total > cap:
        raise InstanceTooLarge(f"C({m.n_cols}, {ell}) = {total} subsets exceeds cap {cap}")
    if m.field.rational:
        fz = frozen_set(m)
        return sum(
            1 for I in itertools.combinations(range(m.n_cols), ell)
            if is_proper_relation(m, I, fz).is_proper
        )
    p = m.field.q
    xi = kernel_basis(m).T.copy()  # n_cols x nullity
    fz = set(np.nonzero(~np.any(xi != 0, axis=1))[0].tolist())
    count = 0
    cache: dict[tuple, bool] = {}
    for I in itertools.combinations(range(m.n_cols), ell):
        residue = tuple(i for i in I if i not in fz)
        if not residue:
            continue
        dep = cache.get(residue)
        if dep is None:
            sub = xi[list(residue)]
            dep = _backend.gfp_rank(sub.copy(), p) < len(residue) if sub.shape[1] else True
            cache[residue] = dep
        count += dep
    return count


def pin(m: SparseMatrix, theta: int, rng: np.random.Generator, columns=None) -> SparseMatrix:
    """Append ``theta`` unit rows at independent uniform columns (optionally from a subset)."""
    if m.n_cols < 1:
        raise InvalidArgument("pinning needs at least one column")
    if theta < 0:
        raise InvalidArgument("theta must be nonnegative")
    if theta == 0:
        return m
    if columns is None:
        idx = rng.integers(0, m.n_cols, size=theta)
    else:
        pool = np.asarray(sorted(set(columns)), dtype=np.int64)
        idx = pool[rng.integers(0, len(pool), size=theta)]
    extra = SparseMatrix(theta, m.n_cols, np.arange(theta), idx, np.ones(theta, dtype=np.int64), m.field)
    return m.vstack(extra)


def block_matrix(A: SparseMatrix, B: SparseMatrix, C: SparseMatrix) -> SparseMatrix:
    """``[[A, 0], [B, C]]``."""
    if B.n_cols != A.n_cols or C.n_rows != B.n_rows:
        raise InvalidArgument("blocks are not conformable")
    return SparseMatrix(
        A.n_rows + B.n_rows,
        A.n_cols + C.n_cols,
        np.concatenate([A.rows, B.rows + A.n_rows, C.rows + A.n_rows]),
        np.concatenate([A.cols, B.cols, C.cols + A.n_cols]),
        np.concatenate([A.vals, B.vals, C.vals]),
        A.field,
    )


def hstack(B: SparseMatrix, C: SparseMatrix) -> SparseMatrix:
    return SparseMatrix(
        B.n_rows,
        B.n_cols + C.n_cols,
        np.concatenate([B.rows, C.rows]),
        np.concatenate([B.cols, C.cols + B.n_cols]),
        np.concatenate([B.vals, C.vals]),
        B.field,
    )


def nullity_delta_lemma_check(A: SparseMatrix, B: SparseMatrix, C: SparseMatrix | None = None):
    """Both sides of the nullity change when appending ``[B C]`` below ``[A 0]``.

    Returns ``(lhs, rhs)`` with ``lhs = nul([[A,0],[B,C]]) - nul(A)`` and
    ``rhs = n' - rank([B_* C])``, where ``B_*`` zeroes the columns of ``B``
    that are frozen in ``A``. Raises :class:`HypothesisFailed` if the set of
    nonzero columns of ``B`` is a proper relation of ``A``.
    """
    if C is None:
        C = SparseMatrix.zeros(B.n_rows, 0, A.field)
    I = B.nonzero_columns()
    fz = frozen_set(A)
    if I and is_proper_relation(A, I, fz).is_proper:
        raise HypothesisFailed("nonzero columns of B form a proper relation of A")
    lhs = nullity(block_matrix(A, B, C)) - nullity(A)
    b_star = B.zero_columns(I & fz)
    rhs = C.n_cols - rank(hstack(b_star, C))
    return lhs, rhs


# ---------------------------------------------------------------------------
# text format


def write_sparse(m: SparseMatrix) -> str:
    head = m.field.describe() if m.field.rational else str(m.field.q)
    lines = [f"SPARSE {m.n_rows} {m.n_cols} {head}"]
    order = np.lexsort((m.cols, m.rows))
    for i in order:
        lines.append(f"{m.rows[i]} {m.cols[i]} {m.vals[i]}")
    return "\n".join(lines) + "\n"


def read_sparse(text: str) -> SparseMatrix:
    header = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if parts[0] != "SPARSE" or len(parts) != 4:
                raise InvalidSpec(f"line {lineno}: expected 'SPARSE n_rows n_cols q'")
            header = (int(parts[1]), int(parts[2]), FieldSpec.parse(parts[3]))
            continue
        if len(parts) != 3:
            raise InvalidSpec(f"line {lineno}: expected 'row col value'")
        r, c, v = (int(x) for x in parts)
        rows.append(r)
        cols.append(c)
        vals.append(v)
    if header is None:
        raise InvalidSpec("missing SPARSE header")
    n_rows, n_cols, fs = header
    return SparseMatrix(n_rows, n_cols, rows, cols, vals, fs)
