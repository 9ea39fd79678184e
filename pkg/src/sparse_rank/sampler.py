"""Random Tanner graphs and matrices with prescribed degree laws.

The number of rows is ``m ~ Po(n * dbar / kbar)``; column degrees and row
degrees are i.i.d. draws, conditioned on having equal totals by rejection of
the whole draw. The graph is a uniform matching of the degree clones
(configuration model), resampled whole until simple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .degree import DegreeDistribution, PointMass, TruncatedPoisson
from .errors import InvalidArgument, InvalidSpec, SamplingFailure
from .formula import EnsembleSpec, _as_ensemble
from .linalg import FieldSpec, SparseMatrix

RATIONAL_ENTRY_BOUND = 1 << 10
SIMPLE_RESAMPLE_CAP = 10_000


@dataclass(frozen=True)
class DegreeSequence:
    d_seq: np.ndarray
    k_seq: np.ndarray
    m: int
    rejections: int

    def __iter__(self):
        return iter((self.d_seq, self.k_seq, self.m))


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Bipartite multigraph; edge ``e`` joins check ``checks[e]`` and variable ``vars[e]``."""

    n_vars: int
    n_checks: int
    checks: np.ndarray
    vars: np.ndarray
    var_degrees: np.ndarray
    check_degrees: np.ndarray
    resamples: int = 0

    @property
    def n_edges(self) -> int:
        return len(self.vars)

    def is_simple(self) -> bool:
        keys = self.checks * max(self.n_vars, 1) + self.vars
        return len(np.unique(keys)) == len(keys)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.checks.tolist(), self.vars.tolist()))

    def csc(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.vars, kind="stable")
        ptr = np.zeros(self.n_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.vars, minlength=self.n_vars), out=ptr[1:])
        return ptr, np.ascontiguousarray(self.checks[order])

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.checks, kind="stable")
        ptr = np.zeros(self.n_checks + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.checks, minlength=self.n_checks), out=ptr[1:])
        return ptr, np.ascontiguousarray(self.vars[order])

    @classmethod
    def from_edges(cls, n_vars: int, n_checks: int, edges) -> "TannerGraph":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        checks, vars_ = arr[:, 0].copy(), arr[:, 1].copy()
        return cls(
            n_vars,
            n_checks,
            checks,
            vars_,
            np.bincount(vars_, minlength=n_vars),
            np.bincount(checks, minlength=n_checks),
        )

    @classmethod
    def from_matrix(cls, m: SparseMatrix) -> "TannerGraph":
        return cls(
            m.n_cols,
            m.n_rows,
            m.rows.copy(),
            m.cols.copy(),
            np.bincount(m.cols, minlength=m.n_cols),
            np.bincount(m.rows, minlength=m.n_rows),
        )


# ---------------------------------------------------------------------------
# entry maps


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class EntryMap:
    """How the nonzero value of each edge is chosen.

    ``ones``: every value is 1. ``uniform``: i.i.d. uniform nonzero values.
    ``chi``: each row and column gets a uniform label in [0, 1) and the value
    is a fixed hash (keyed by ``seed``) of the label pair.
    """

    mode: str = "ones"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("ones", "uniform", "chi"):
            raise InvalidSpec(f"unknown entry map {self.mode!r}")

    @classmethod
    def parse(cls, text) -> "EntryMap":
        if isinstance(text, EntryMap):
            return text
        mode, _, arg = str(text).strip().lower().partition(":")
        if mode == "chi":
            return cls("chi", int(arg) if arg else 0)
        if arg:
            raise InvalidSpec(f"entry map {mode!r} takes no argument")
        return cls(mode)

    def describe(self) -> str:
        return f"chi:{self.seed}" if self.mode == "chi" else self.mode

    def _to_field(self, h: np.ndarray, fs: FieldSpec) -> np.ndarray:
        if fs.rational:
            mag = 1 + (h >> np.uint64(1)) % np.uint64(RATIONAL_ENTRY_BOUND)
            sign = np.where(h & np.uint64(1), -1, 1)
            return sign * mag.astype(np.int64)
        return (1 + h % np.uint64(fs.q - 1)).astype(np.int64)

    def values(self, g: TannerGraph, fs: FieldSpec, rng: np.random.Generator) -> np.ndarray:
        e = g.n_edges
        if self.mode == "ones":
            return np.ones(e, dtype=np.int64)
        if self.mode == "uniform":
            h = rng.integers(0, np.iinfo(np.int64).max, size=e, dtype=np.int64).astype(np.uint64)
            return self._to_field(h, fs)
        row_labels = rng.random(g.n_checks)
        col_labels = rng.random(g.n_vars)
        r = (row_labels[g.checks] * 2.0**32).astype(np.uint64)
        c = (col_labels[g.vars] * 2.0**32).astype(np.uint64)
        key = _splitmix64(np.full(e, self.seed, dtype=np.uint64))
        h = _splitmix64(key ^ (r << np.uint64(32)) ^ c)
        return self._to_field(h, fs)


# ---------------------------------------------------------------------------
# degree sequences


def _support_gcd_and_residue(dist: DegreeDistribution) -> tuple[int, int]:
    """(g, a): every draw is congruent to ``a`` modulo ``g``; g = 0 for a point mass."""
    if isinstance(dist, TruncatedPoisson):
        return 1, 0
    support, probs = dist.table()
    atoms = [int(j) for j, p in zip(support, probs) if p >= 1e-12]
    g = 0
    for j in atoms:
        g = math.gcd(g, j - atoms[0])
    return g, atoms[0]


def check_feasible(ens: EnsembleSpec, n: int) -> None:
    """Raise unless equal totals are attainable for large ``m``.

    Row totals range over multiples of the row-support gcd ``gk``; column
    totals over ``n*a + gd*Z`` (exactly ``n*a`` for a point mass).
    """
    if n < 1:
        raise InvalidArgument("n must be positive")
    gk = ens.check_dist.gcd_support()
    gd, a = _support_gcd_and_residue(ens.var_dist)
    g = math.gcd(gk, gd)
    if (n * a) % g:
        need = g // math.gcd(g, a)
        raise InvalidArgument(
            f"n={n} admits no degree sequence with equal totals (need divisibility by {need})"
        )


def _draw_total(dist: DegreeDistribution, rng: np.random.Generator, count: int):
    """Return (total, seq) where seq may be None if only the total was drawn."""
    if isinstance(dist, PointMass):
        return count * dist.k0, None
    if isinstance(dist, TruncatedPoisson) and dist.ell == 0:
        return int(rng.poisson(dist.lam * count)) if count else 0, None
    seq = dist.sample(rng, count)
    return int(seq.sum()), seq


def _realize(dist: DegreeDistribution, rng: np.random.Generator, count: int, total: int, seq):
    if seq is not None:
        return seq.astype(np.int64)
    if isinstance(dist, PointMass):
        return np.full(count, dist.k0, dtype=np.int64)
    # Poisson counts given their total are multinomial with equal cells
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.multinomial(total, np.full(count, 1.0 / count)).astype(np.int64)


def sample_degree_sequence(ens, n: int, rng: np.random.Generator, max_attempts: int | None = None) -> DegreeSequence:
    """Draw ``(d_seq, k_seq, m)`` conditioned on ``sum(d_seq) == sum(k_seq)``.

    Point masses and plain Poisson laws have their totals drawn directly and
    the sequence filled in afterwards from the conditional law, which leaves
    the accepted distribution unchanged and avoids drawing whole sequences on
    every rejected attempt.
    """
    ens = _as_ensemble(ens)
    check_feasible(ens, n)
    cap = max_attempts if max_attempts is not None else int(1e6 * math.sqrt(n))
    mean_rows = ens.d * n / ens.k
    for attempt in range(cap):
        m = int(rng.poisson(mean_rows))
        sd, dseq = _draw_total(ens.var_dist, rng, n)
        sk, kseq = _draw_total(ens.check_dist, rng, m)
        if sd == sk:
            d_seq = _realize(ens.var_dist, rng, n, sd, dseq)
            k_seq = _realize(ens.check_dist, rng, m, sk, kseq)
            return DegreeSequence(d_seq, k_seq, m, attempt)
    raise SamplingFailure(f"no degree sequence with equal totals after {cap} attempts", attempts=cap)


def sample_tanner(d_seq, k_seq, rng: np.random.Generator, simple: bool = True,
                  max_resamples: int = SIMPLE_RESAMPLE_CAP) -> TannerGraph:
    """Uniform matching of variable clones to check clones."""
    d_seq = np.asarray(d_seq, dtype=np.int64)
    k_seq = np.asarray(k_seq, dtype=np.int64)
    if d_seq.sum() != k_seq.sum():
        raise InvalidArgument("degree totals differ")
    n, m = len(d_seq), len(k_seq)
    var_clones = np.repeat(np.arange(n, dtype=np.int64), d_seq)
    check_clones = np.repeat(np.arange(m, dtype=np.int64), k_seq)
    for attempt in range(max_resamples + 1):
        checks = rng.permutation(check_clones)
        g = TannerGraph(n, m, checks, var_clones.copy(), d_seq.copy(), k_seq.copy(), attempt)
        if not simple or g.is_simple():
            return g
    raise SamplingFailure(f"no simple graph after {max_resamples} resamples", attempts=max_resamples)


def sample_matrix(g: TannerGraph, field, entries="ones", rng: np.random.Generator | None = None) -> SparseMatrix:
    """One nonzero per edge; parallel edges of a multigraph add up (zero sums dropped)."""
    fs = FieldSpec.parse(field)
    emap = EntryMap.parse(entries)
    rng = rng if rng is not None else np.random.default_rng(0)
    vals = emap.values(g, fs, rng)
    rows, cols = g.checks, g.vars
    if not g.is_simple():
        keys = rows * max(g.n_vars, 1) + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(summed, inv, vals)
        if not fs.rational:
            summed %= fs.q
        keep = summed != 0
        rows, cols, vals = uniq[keep] // max(g.n_vars, 1), uniq[keep] % max(g.n_vars, 1), summed[keep]
    elif not fs.rational:
        vals = vals % fs.q
    return SparseMatrix(g.n_checks, g.n_vars, rows, cols, vals, fs)


def sample_ensemble_graph(ens, n: int, rng: np.random.Generator, simple: bool = True) -> TannerGraph:
    seq = sample_degree_sequence(ens, n, rng)
    return sample_tanner(seq.d_seq, seq.k_seq, rng, simple=simple)


def sample_ensemble_matrix(ens, n: int, field=2, entries="ones", rng: np.random.Generator | None = None,
                           simple: bool = True) -> SparseMatrix:
    rng = rng if rng is not None else np.random.default_rng(0)
    g = sample_ensemble_graph(ens, n, rng, simple=simple)
    return sample_matrix(g, field, entries, rng)
