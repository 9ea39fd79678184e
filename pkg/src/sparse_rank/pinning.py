"""Experiments on pinned matrices: freeness, frozen-set growth, pair independence.

Pinning a column ``i`` appends the unit row ``e_i``, which cuts the kernel
down to ``{x in ker : x_i = 0}``. These experiments keep an explicit kernel
basis and update it per pin instead of re-eliminating the whole matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidArgument, UnsupportedField
from .linalg import SparseMatrix, count_proper_relations, frozen_set, is_proper_relation, kernel_basis, pin
from .sampler import sample_ensemble_matrix


def default_pin_budget(delta: float, ell: int) -> int:
    """Smallest budget above ``4 ell^3 / delta^4`` used for freeness: ceil(...) + 1."""
    return math.ceil(4 * ell**3 / delta**4) + 1


def draw_theta(budget: int, rng: np.random.Generator) -> int:
    """Uniform on {1, ..., budget}; zero when the budget is zero."""
    if budget < 0:
        raise InvalidArgument("pin budget must be nonnegative")
    return int(rng.integers(1, budget + 1)) if budget else 0


class KernelTracker:
    """Kernel basis over GF(q) that shrinks as coordinates are pinned to zero."""

    def __init__(self, m: SparseMatrix, basis: np.ndarray | None = None):
        if m.field.rational:
            raise UnsupportedField("kernel tracking needs a finite field")
        self.q = m.field.q
        self.n = m.n_cols
        self.basis = kernel_basis(m) if basis is None else basis

    def copy(self) -> "KernelTracker":
        other = object.__new__(KernelTracker)
        other.q, other.n, other.basis = self.q, self.n, self.basis.copy()
        return other

    @property
    def nullity(self) -> int:
        return self.basis.shape[0]

    def frozen_mask(self) -> np.ndarray:
        if self.nullity == 0:
            return np.ones(self.n, dtype=bool)
        return ~np.any(self.basis != 0, axis=0)

    def pin(self, i: int) -> None:
        col = self.basis[:, i]
        nz = np.nonzero(col)[0]
        if len(nz) == 0:
            return
        p = nz[0]
        inv = pow(int(col[p]), self.q - 2, self.q)
        piv = (self.basis[p] * inv) % self.q
        rest = np.delete(self.basis, p, axis=0)
        self.basis = (rest - rest[:, i : i + 1] * piv) % self.q


@dataclass
class FreenessReport:
    trials: int
    n: int
    delta: float
    ell: int
    budget: int
    threshold: float
    theta_draws: list = field(default_factory=list)
    proper_relation_counts: list = field(default_factory=list)

    @property
    def fraction_free(self) -> float:
        if not self.trials:
            return 0.0
        return sum(c <= self.threshold for c in self.proper_relation_counts) / self.trials

    @property
    def sigma(self) -> float:
        p = 1.0 - self.delta
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else 0.0


def freeness_experiment(ens, n: int, delta: float, ell: int, budget: int | None = None, trials: int = 200,
                        rng: np.random.Generator | None = None, field=2, entries="ones", matrix=None,
                        cap: int = 2_000_000) -> FreenessReport:
    """Count proper ``ell``-relations of ``A[theta]`` with ``theta`` uniform on the budget.

    A trial is free when the count is at most ``delta * n**ell``. Pass ``matrix``
    to pin a fixed matrix instead of sampling one per trial.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    budget = default_pin_budget(delta, ell) if budget is None else budget
    if matrix is not None:
        n = matrix.n_cols
    report = FreenessReport(trials, n, delta, ell, budget, delta * n**ell)
    for _ in range(trials):
        a = matrix if matrix is not None else sample_ensemble_matrix(ens, n, field, entries, rng)
        theta = draw_theta(budget, rng)
        pinned = pin(a, theta, rng)
        report.theta_draws.append(theta)
        report.proper_relation_counts.append(count_proper_relations(pinned, ell, cap))
    return report


@dataclass
class FrozenGrowth:
    """Per step ``t``: pinned column, ``|frozen(A[t])|`` and the estimate of ``Delta_t``."""

    n: int
    ell: int
    continuations: int
    steps: list = field(default_factory=list)  # (t, column or None, frozen size, delta_t)
    monotone: bool = True

    @property
    def frozen_sizes(self) -> list[int]:
        return [s[2] for s in self.steps]

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s[3] for s in self.steps], dtype=float)


def _delta_estimate(tracker: KernelTracker, ell: int, r: int, rng, pool) -> float:
    base = int(tracker.frozen_mask().sum())
    if r == 0:
        return float("nan")
    total = 0
    for _ in range(r):
        t = tracker.copy()
        for i in pool[rng.integers(0, len(pool), size=ell)]:
            t.pin(int(i))
        total += int(t.frozen_mask().sum()) - base
    return total / (r * tracker.n)


def frozen_growth(m: SparseMatrix, ell: int, steps: int, rng: np.random.Generator, continuations: int = 32,
                  columns=None) -> FrozenGrowth:
    """Pin one uniform column at a time, tracking the frozen set.

    ``Delta_t = (E[|frozen(A[t+ell])| | A[t]] - |frozen(A[t])|) / n`` is
    estimated from ``continuations`` independent ``ell``-pin extensions
    (``nan`` when ``continuations`` is 0). ``monotone`` records whether every
    frozen set contained the previous one.
    """
    if m.n_cols < 1:
        raise InvalidArgument("need at least one column")
    pool = np.arange(m.n_cols) if columns is None else np.asarray(sorted(set(columns)), dtype=np.int64)
    tracker = KernelTracker(m)
    out = FrozenGrowth(m.n_cols, ell, continuations)
    prev = tracker.frozen_mask()
    out.steps.append((0, None, int(prev.sum()), _delta_estimate(tracker, ell, continuations, rng, pool)))
    for t in range(1, steps + 1):
        i = int(pool[rng.integers(0, len(pool))])
        tracker.pin(i)
        cur = tracker.frozen_mask()
        if np.any(prev & ~cur):
            out.monotone = False
        prev = cur
        out.steps.append((t, i, int(cur.sum()), _delta_estimate(tracker, ell, continuations, rng, pool)))
    return out


# ---------------------------------------------------------------------------
# pair marginals


def _span2(u: np.ndarray, v: np.ndarray, q: int) -> set[tuple[int, int]]:
    """Image of ``x -> (x.u, x.v)``: the span of the columns of the 2 x N matrix [u; v]."""
    pts = {(0, 0)}
    for a, b in zip(u.tolist(), v.tolist()):
        if (a, b) in pts:
            continue
        pts = {((x + c * a) % q, (y + c * b) % q) for x, y in pts for c in range(q)}
        if len(pts) == q * q:
            break
    return pts


@dataclass
class PairDiscrepancy:
    pair: tuple[int, int]
    tv: Fraction
    proper_relation: bool


@dataclass
class IndependenceReport:
    q: int
    n: int
    theta: int
    nullity: int
    samples: int  # pairs evaluated
    pair_tv_sum: float
    pairs: list = field(default_factory=list)

    @property
    def nonproper_exact_zero(self) -> bool:
        return all(p.tv == 0 for p in self.pairs if not p.proper_relation)

    @property
    def proper_pairs(self) -> int:
        return sum(p.proper_relation for p in self.pairs)


def pair_tv(u: np.ndarray, v: np.ndarray, q: int) -> Fraction:
    """Sum over value pairs of |joint - product of marginals| for two kernel coordinates.

    The coordinate pair of a uniform kernel vector is uniform on the image
    subspace, so every probability is exact.
    """
    pts = _span2(u, v, q)
    w = Fraction(1, len(pts))
    mi: dict[int, Fraction] = {}
    mj: dict[int, Fraction] = {}
    for a, b in pts:
        mi[a] = mi.get(a, 0) + w
        mj[b] = mj.get(b, 0) + w
    total = Fraction(0)
    for a in mi:
        for b in mj:
            joint = w if (a, b) in pts else Fraction(0)
            total += abs(joint - mi[a] * mj[b])
    return total


def independence_experiment(m: SparseMatrix, budget: int, rng: np.random.Generator,
                            check_relations: bool = True) -> IndependenceReport:
    """Exact pairwise dependence of kernel coordinates of ``A[theta]``.

    ``pair_tv_sum`` is the sum of :func:`pair_tv` over unordered pairs divided
    by ``n**2``. With ``check_relations`` every pair is also classified as a
    proper relation or not, independently through rank tests.
    """
    if m.field.rational:
        raise UnsupportedField("independence needs a finite field")
    q = m.field.q
    theta = draw_theta(budget, rng)
    a = pin(m, theta, rng)
    xi = kernel_basis(a).T.copy()
    n = a.n_cols
    report = IndependenceReport(q, n, theta, xi.shape[1], 0, 0.0)
    frozen = frozen_set(a) if check_relations else None
    total = Fraction(0)
    for i, j in itertools.combinations(range(n), 2):
        tv = pair_tv(xi[i], xi[j], q)
        proper = is_proper_relation(a, (i, j), frozen).is_proper if check_relations else tv != 0
        report.pairs.append(PairDiscrepancy((i, j), tv, proper))
        total += tv
    report.samples = len(report.pairs)
    report.pair_tv_sum = float(total / (n * n)) if n else 0.0
    return report
