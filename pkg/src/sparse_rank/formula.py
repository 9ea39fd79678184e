"""Asymptotic rank formula for the sparse random matrix ensemble.

For an ensemble with column-degree law ``d`` (PGF ``D``, mean ``dbar``) and
row-degree law ``k`` (PGF ``K``, mean ``kbar``) the normalised rank converges
to ``1 - max_{a in [0,1]} Phi(a)`` where::

    Phi(a) = D(1 - K'(a)/kbar) - (dbar/kbar) * (1 - K(a) - (1 - a) K'(a))

This module evaluates ``Phi``, its stationarity factor ``phi``, the largest
stationary point ``rho`` (which also governs the 2-core of the Tanner graph),
the 2-core bound, and a structural tightness certificate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .degree import DegreeDistribution, FinitePmf, PointMass, TruncatedPoisson, make_distribution
from .errors import InvalidSpec, NumericFailure, UnsupportedEnumeration

GRID_POINTS = 10_001
GOLDEN_TOL = 1e-9
TIE_TOL = 1e-12
RHO_STEP_TOL = 1e-13
RHO_MAX_ITER = 100_000
RHO_ROOT_TOL = 1e-10
NOT_TIGHT_MARGIN = 1e-7
BETHE_MAX_DEGREE = 12


@dataclass(frozen=True)
class EnsembleSpec:
    """Column-degree law ``var_dist`` and row-degree law ``check_dist``."""

    var_dist: DegreeDistribution
    check_dist: DegreeDistribution

    def __post_init__(self):
        if not self.var_dist.mean > 0 or not self.check_dist.mean > 0:
            raise InvalidSpec("both degree laws need a positive mean")

    @property
    def d(self) -> float:
        return self.var_dist.mean

    @property
    def k(self) -> float:
        return self.check_dist.mean

    def D(self, x, order=0):
        return self.var_dist.pgf(x, order)

    def K(self, x, order=0):
        return self.check_dist.pgf(x, order)

    @classmethod
    def parse(cls, text: str) -> "EnsembleSpec":
        """Parse ``"d=<dist>;k=<dist>"`` (see :mod:`sparse_rank.degree` for ``<dist>``)."""
        parts = {}
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            key, eq, value = chunk.partition("=")
            if not eq:
                raise InvalidSpec(f"expected d=... and k=... in {text!r}")
            parts[key.strip().lower()] = value.strip()
        if set(parts) != {"d", "k"}:
            raise InvalidSpec(f"ensemble spec needs exactly d= and k=, got {text!r}")
        return cls(make_distribution(parts["d"]), make_distribution(parts["k"]))

    def describe(self) -> str:
        return f"d={self.var_dist.describe()};k={self.check_dist.describe()}"

    def strip_zeros(self) -> "EnsembleSpec":
        """Condition both laws on being positive (drops isolated rows/columns)."""
        return EnsembleSpec(_condition_positive(self.var_dist), _condition_positive(self.check_dist))


def _condition_positive(dist: DegreeDistribution) -> DegreeDistribution:
    if isinstance(dist, TruncatedPoisson):
        if dist.ell >= 1:
            return dist
        return TruncatedPoisson(1, dist.lam)
    support, probs = dist.table()
    if support[0] > 0:
        return dist
    keep = support > 0
    total = probs[keep].sum()
    return FinitePmf({int(j): float(p / total) for j, p in zip(support[keep], probs[keep])})


class Tightness(str, enum.Enum):
    TIGHT_BY_THEOREM = "TightByTheorem"
    BOUND_NOT_TIGHT = "BoundNotTight"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class RankPrediction:
    alpha_star: float
    phi_max: float
    rank_fraction: float
    rho: float
    core_var_fraction: float
    core_check_fraction: float
    two_core_bound: float
    tightness: Tightness
    phi_prime_at_rho: float
    core_hypothesis: str  # "ok" or "hypothesis-violated"

    FIELDS = (
        "alpha_star", "phi_max", "rank_fraction", "rho", "core_var_fraction",
        "core_check_fraction", "two_core_bound", "tightness", "phi_prime_at_rho",
        "core_hypothesis",
    )

    def as_row(self) -> dict:
        row = asdict(self)
        row["tightness"] = self.tightness.value
        return row


def _as_ensemble(ens) -> EnsembleSpec:
    if isinstance(ens, EnsembleSpec):
        return ens
    if isinstance(ens, str):
        return EnsembleSpec.parse(ens)
    raise InvalidSpec(f"not an ensemble: {ens!r}")


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def phi(ens: EnsembleSpec, alpha):
    """``Phi(alpha)``; vectorised over ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    d, k = ens.d, ens.k
    kp = ens.K(a, 1)
    y = np.clip(1.0 - kp / k, 0.0, 1.0)
    val = ens.D(y) - (d / k) * (1.0 - ens.K(a) - (1.0 - a) * kp)
    return _scalar(val)


def phi_small(ens: EnsembleSpec, alpha):
    """Stationarity factor ``phi(a) = 1 - a - D'(1 - K'(a)/k)/d``."""
    a = np.asarray(alpha, dtype=float)
    y = np.clip(1.0 - ens.K(a, 1) / ens.k, 0.0, 1.0)
    return _scalar(1.0 - a - ens.D(y, 1) / ens.d)


def phi_small_prime(ens: EnsembleSpec, alpha):
    """Derivative ``phi'(a) = -1 + K''(a) D''(1 - K'(a)/k) / (d k)``."""
    a = np.asarray(alpha, dtype=float)
    y = np.clip(1.0 - ens.K(a, 1) / ens.k, 0.0, 1.0)
    return _scalar(-1.0 + ens.K(a, 2) * ens.D(y, 2) / (ens.d * ens.k))


def phi_prime_check(ens: EnsembleSpec, alpha):
    """Analytic ``Phi'(a) = (d/k) K''(a) phi(a)``."""
    a = np.asarray(alpha, dtype=float)
    return _scalar((ens.d / ens.k) * ens.K(a, 2) * phi_small(ens, a))


def phi_second(ens: EnsembleSpec, alpha):
    """``Phi''(a) = (d/k) (K'''(a) phi(a) + K''(a) phi'(a))``."""
    a = np.asarray(alpha, dtype=float)
    val = (ens.d / ens.k) * (ens.K(a, 3) * phi_small(ens, a) + ens.K(a, 2) * phi_small_prime(ens, a))
    return _scalar(val)


def fixed_point_map(ens: EnsembleSpec, x):
    """``g(x) = 1 - D'(1 - K'(x)/k)/d``; its largest fixed point is rho."""
    x = np.asarray(x, dtype=float)
    y = np.clip(1.0 - ens.K(x, 1) / ens.k, 0.0, 1.0)
    return _scalar(1.0 - ens.D(y, 1) / ens.d)


def _degenerate_rho(ens: EnsembleSpec) -> float | None:
    """Closed forms for the branches where K'' vanishes or phi is affine."""
    ks, kp = ens.check_dist.table()
    if not np.any((ks >= 2) & (kp > 0)):
        # K'' vanishes identically
        return 0.0
    if isinstance(ens.check_dist, PointMass) and ens.check_dist.k0 == 2:
        md = ens.var_dist.max_degree
        if md is not None and md <= 2:
            p2 = ens.var_dist.pmf(2)
            # phi(a) = -a (1 - 2 P[d=2]/d)
            slope = 1.0 - 2.0 * p2 / ens.d
            return 1.0 if abs(slope) <= 1e-15 else 0.0
    return None


def rho(ens: EnsembleSpec) -> float:
    """Largest ``x`` in [0,1] with ``Phi'(x) = 0``.

    Iterates ``x <- g(x)`` from 1 (the iterates decrease monotonically to the
    largest fixed point because ``g`` is nondecreasing), then polishes by
    bisection on ``phi`` if the iteration stalls.
    """
    ens = _as_ensemble(ens)
    closed = _degenerate_rho(ens)
    if closed is not None:
        return closed
    x = 1.0
    converged = False
    for _ in range(RHO_MAX_ITER):
        nx = fixed_point_map(ens, x)
        if abs(nx - x) < RHO_STEP_TOL:
            x = nx
            converged = True
            break
        x = nx
    x = min(max(x, 0.0), 1.0)
    if abs(phi_small(ens, x)) < RHO_ROOT_TOL:
        # snap a vanishing iterate onto the exact root at 0
        if x < 1e-12 and abs(phi_small(ens, 0.0)) < RHO_ROOT_TOL:
            return 0.0
        return x
    root = _polish_root(ens, x)
    if root is None:
        raise NumericFailure(
            f"fixed-point iteration for rho did not settle (converged={converged})", last_iterate=x
        )
    return root


def _polish_root(ens: EnsembleSpec, x_hi: float) -> float | None:
    """Bisection for the largest root of phi at or below ``x_hi``."""
    f_hi = phi_small(ens, x_hi)
    if f_hi > 0:
        # iterate overshot downwards; walk up to the sign change
        grid = np.linspace(x_hi, 1.0, 2001)
        vals = phi_small(ens, grid)
        neg = np.nonzero(vals <= 0)[0]
        if len(neg) == 0:
            return None
        lo, hi = grid[neg[0] - 1], grid[neg[0]]
    else:
        grid = np.linspace(0.0, x_hi, 20001)
        vals = phi_small(ens, grid)
        nonneg = np.nonzero(vals >= 0)[0]
        if len(nonneg) == 0:
            return None
        i = nonneg[-1]
        if i == len(grid) - 1:
            return float(grid[i])
        lo, hi = grid[i], grid[i + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if phi_small(ens, mid) >= 0:
            lo = mid
        else:
            hi = mid
    best = lo if abs(phi_small(ens, lo)) <= abs(phi_small(ens, hi)) else hi
    if abs(phi_small(ens, best)) > RHO_ROOT_TOL and hi - lo > 1e-14:
        return None
    return float(best)


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL, max_iter: int = 500):
    """Maximise a unimodal scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    e = a + inv_phi * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + inv_phi * (b - a)
            fe = f(e)
    candidates = [(a, f(a)), (c, fc), (e, fe), (b, f(b))]
    x, fx = max(candidates, key=lambda t: (t[1], -t[0]))
    return float(x), float(fx)


def max_phi(ens: EnsembleSpec) -> tuple[float, float]:
    """Global maximiser of ``Phi`` on [0,1] (smallest one on ties)."""
    ens = _as_ensemble(ens)
    grid = np.linspace(0.0, 1.0, GRID_POINTS)
    vals = phi(ens, grid)
    top = float(np.max(vals))
    best = int(np.nonzero(vals >= top - TIE_TOL)[0][0])
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, GRID_POINTS - 1)]
    x, fx = golden_section_max(lambda a: phi(ens, a), float(lo), float(hi))
    if fx <= vals[best] + TIE_TOL:
        x, fx = float(grid[best]), float(vals[best])
    return x, fx


def core_fractions(ens: EnsembleSpec, r: float) -> tuple[float, float]:
    """Limits of (core variables)/n and (core checks)/n at stationary point ``r``."""
    t = ens.K(r, 1) / ens.k
    y = min(max(1.0 - t, 0.0), 1.0)
    n_star = 1.0 - ens.D(y) - t * ens.D(y, 1)
    m_star = (ens.d / ens.k) * ens.K(r)
    if r == 0.0:
        n_star = 0.0
    return max(n_star, 0.0), m_star


def core_fractions_variant(ens: EnsembleSpec, r: float) -> float:
    """Variable-core fraction with ``D'(K'(r)/k)`` in place of ``D'(1 - K'(r)/k)``.

    Kept only to document the alternative printed form; it disagrees with
    direct peeling (see tests).
    """
    t = ens.K(r, 1) / ens.k
    return 1.0 - ens.D(1.0 - t) - t * ens.D(t, 1)


def _is_tight_marginal(dist: DegreeDistribution) -> bool:
    return isinstance(dist, TruncatedPoisson) or dist.is_degenerate


def tightness_certificate(ens: EnsembleSpec, alpha_phi=None, r=None) -> Tightness:
    """Structural tightness check plus numeric detection of a strictly better interior max."""
    ens = _as_ensemble(ens)
    if _is_tight_marginal(ens.var_dist) and _is_tight_marginal(ens.check_dist):
        return Tightness.TIGHT_BY_THEOREM
    _, fmax = alpha_phi if alpha_phi is not None else max_phi(ens)
    r = rho(ens) if r is None else r
    if fmax > max(phi(ens, 0.0), phi(ens, r)) + NOT_TIGHT_MARGIN:
        return Tightness.BOUND_NOT_TIGHT
    return Tightness.UNDETERMINED


def exception_condition(ens: EnsembleSpec) -> bool:
    """``P[d=1] = 0`` and ``2 (E k - 1) P[d=2] > E d``: the case where phi'(rho) < 0 may fail."""
    return ens.var_dist.pmf(1) == 0 and 2.0 * (ens.k - 1.0) * ens.var_dist.pmf(2) > ens.d


def rank_prediction(ens: EnsembleSpec) -> RankPrediction:
    ens = _as_ensemble(ens)
    a_star, fmax = max_phi(ens)
    r = rho(ens)
    n_star, m_star = core_fractions(ens, r)
    bound = 1.0 - max(phi(ens, 0.0), phi(ens, r))
    fprime = float(phi_small_prime(ens, r))
    return RankPrediction(
        alpha_star=a_star,
        phi_max=fmax,
        rank_fraction=1.0 - fmax,
        rho=r,
        core_var_fraction=n_star,
        core_check_fraction=m_star,
        two_core_bound=bound,
        tightness=tightness_certificate(ens, (a_star, fmax), r),
        phi_prime_at_rho=fprime,
        core_hypothesis="ok" if fprime < 0 else "hypothesis-violated",
    )


def curve(ens: EnsembleSpec, points: int = 101) -> list[tuple[float, float]]:
    grid = np.linspace(0.0, 1.0, points)
    return list(zip(grid.tolist(), np.atleast_1d(phi(ens, grid)).tolist()))


# ---------------------------------------------------------------------------
# two-point Bethe free entropy, by exact counting over F_q


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    f = 2
    while f * f <= q:
        if q % f == 0:
            return False
        f += 1
    return True


def _finite_atoms(dist: DegreeDistribution, label: str) -> list[tuple[int, float]]:
    md = dist.max_degree
    if md is None or md > BETHE_MAX_DEGREE:
        raise UnsupportedEnumeration(f"{label} needs finite support with max degree <= {BETHE_MAX_DEGREE}")
    s, p = dist.table()
    return [(int(j), float(w)) for j, w in zip(s, p) if w > 0]


def _constraint_weight(q: int, coeffs: list[int], messages: list[tuple[Fraction, ...]], fixed: int):
    """Weighted count ``sum_sigma 1{fixed + sum coeffs*sigma = 0 mod q} prod mu(sigma)``.

    Dynamic programme over partial sums in Z_q; exact in rationals.
    """
    dist = [Fraction(0)] * q
    dist[fixed % q] = Fraction(1)
    for c, mu in zip(coeffs, messages):
        new = [Fraction(0)] * q
        for s, w in enumerate(dist):
            if w == 0:
                continue
            for sigma, m in enumerate(mu):
                if m:
                    new[(s + c * sigma) % q] += w * m
        dist = new
    return dist[0]


def _log_q(value: Fraction, q: int) -> float:
    return (math.log(value.numerator) - math.log(value.denominator)) / math.log(q)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def bethe_two_point(ens: EnsembleSpec, q: int, alpha: float, seed: int = 0) -> float:
    """Bethe free entropy of ``alpha * delta_{frozen} + (1-alpha) * delta_{uniform}``.

    Messages are either the point mass at 0 ("frozen") or uniform on F_q.
    All expectations over the finite degree laws are summed exactly; each
    inner partition function is an exact weighted count of solutions of one
    linear equation with random nonzero coefficients.
    """
    ens = _as_ensemble(ens)
    if not _is_prime(q):
        raise InvalidSpec(f"q={q} is not prime")
    d_atoms = _finite_atoms(ens.var_dist, "variable law")
    k_atoms = _finite_atoms(ens.check_dist, "check law")
    kb_atoms = [(j, j * w / ens.k) for j, w in k_atoms if j > 0]
    rng = np.random.default_rng(seed)
    frozen = tuple(Fraction(1) if s == 0 else Fraction(0) for s in range(q))
    uniform = tuple(Fraction(1, q) for _ in range(q))
    a = float(alpha)

    # variable side: distribution over per-check message vectors S(sigma_1)
    types: dict[tuple[Fraction, ...], float] = {}
    for j, w in kb_atoms:
        coeffs = [int(c) for c in rng.integers(1, q, size=j)]
        for f in range(j):
            weight = w * math.comb(j - 1, f) * a**f * (1.0 - a) ** (j - 1 - f)
            if weight == 0.0:
                continue
            msgs = [frozen] * f + [uniform] * (j - 1 - f)
            vec = tuple(
                _constraint_weight(q, coeffs[1:], msgs, coeffs[0] * s1) for s1 in range(q)
            )
            types[vec] = types.get(vec, 0.0) + weight
    vecs = list(types)
    probs = [types[v] for v in vecs]

    first = 0.0
    for dd, pd in d_atoms:
        if dd == 0:
            first += pd * 1.0  # log_q of q choices for sigma_1
            continue
        for counts in _compositions(dd, len(vecs)):
            coef = math.factorial(dd)
            weight = 1.0
            for c, pr in zip(counts, probs):
                coef //= math.factorial(c)
                weight *= pr**c
            if weight == 0.0:
                continue
            z = Fraction(0)
            for s1 in range(q):
                term = Fraction(1)
                for c, v in zip(counts, vecs):
                    term *= v[s1] ** c
                z += term
            first += pd * coef * weight * _log_q(z, q)

    second = 0.0
    for kk, pk in k_atoms:
        if kk <= 1:
            continue  # weight (kk-1) log Z vanishes: Z = 1 for kk = 0
        coeffs = [int(c) for c in rng.integers(1, q, size=kk)]
        inner = 0.0
        for f in range(kk + 1):
            weight = math.comb(kk, f) * a**f * (1.0 - a) ** (kk - f)
            if weight == 0.0:
                continue
            msgs = [frozen] * f + [uniform] * (kk - f)
            z = _constraint_weight(q, coeffs, msgs, 0)
            inner += weight * _log_q(z, q)
        second += pk * (kk - 1) * inner
    return first - (ens.d / ens.k) * second


def full_rank_threshold(k_deg: int = 3, lo: float = 0.5, hi: float = None, tol: float = 1e-10) -> float:
    """Largest mean column degree ``d`` (Poisson columns, rows of weight ``k_deg``)
    for which ``max Phi = Phi(0)``, i.e. the matrix keeps full row rank."""

    def full_rank(dv: float) -> bool:
        ens = EnsembleSpec(TruncatedPoisson(0, dv), PointMass(k_deg))
        _, fmax = max_phi(ens)
        return fmax <= phi(ens, 0.0) + TIE_TOL

    hi = float(k_deg) if hi is None else hi
    if not full_rank(lo) or full_rank(hi):
        raise NumericFailure("threshold bracket does not straddle the transition")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if full_rank(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# closed forms for two Poisson families, evaluated without the general Phi


def _grid_max(f, points: int = 200_001) -> float:
    grid = np.linspace(0.0, 1.0, points)
    vals = f(grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    _, best = golden_section_max(f, lo, hi)
    return max(float(vals[i]), best)


def bipartite_adjacency_rank(delta: float) -> float:
    """Rank fraction when both degree laws are Po(delta) (square Bernoulli bipartite adjacency)."""

    def f(a):
        e = np.exp(delta * (a - 1.0))
        return np.exp(-delta * e) + (1.0 + (1.0 - a) * delta) * e

    return 2.0 - _grid_max(f)


def fixed_row_weight_rank(d: float, k: int) -> float:
    """Rank fraction for Po(d) columns and rows of weight exactly ``k``."""

    def f(a):
        return np.exp(-d * a ** (k - 1)) - d / k * (1.0 - k * a ** (k - 1) + (k - 1) * a**k)

    return 1.0 - _grid_max(f)
