"""Degree distributions on the nonnegative integers.

Four families are supported: point masses, (left-)truncated Poisson laws
``Po_{>=l}(lam)``, explicit probability mass functions and PGF polynomials.
Every distribution evaluates its probability generating function and the
first three derivatives exactly (the truncated Poisson law through the
partial exponential series ``h_r``), samples, and size-biases.

Text grammar accepted by :func:`parse_distribution`::

    point:3
    po:2.5                  Poisson with mean 2.5
    po:>=2:mean=3.0         Po_{>=2} with rate solved from the mean
    po:>=2:lambda=1.7       Po_{>=2} with the rate given directly
    pmf:2=0.88,11=0.12      explicit atoms (fractions such as 22/25 allowed)
    pgf:[0,0,0.88,0.12]     PGF coefficients, index = degree
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import (
    DegenerateDistribution,
    InfeasibleMean,
    InvalidSpec,
    UnsupportedOrder,
)

MAX_ORDER = 3
GCD_ATOM_FLOOR = 1e-12
SUM_TOLERANCE = 1e-9
SERIES_CUTOFF = 1e-16


def h_series(r: int, y):
    """Partial exponential series ``sum_{j>=r} y**j / j!``; ``exp(y)`` for r < 0.

    Vectorised over ``y >= 0``. Terms are summed until the next term is below
    ``1e-16`` of the partial sum at every point.
    """
    y = np.asarray(y, dtype=float)
    if r < 0:
        return np.exp(y)
    if np.any(y < 0):
        raise ValueError("h_series needs y >= 0")
    # j = r term, computed in log space to survive large r
    with np.errstate(divide="ignore"):
        log_term = r * np.log(y) - math.lgamma(r + 1) if r > 0 else np.zeros_like(y)
    term = np.where(y > 0, np.exp(log_term), 1.0 if r == 0 else 0.0)
    total = term.copy()
    j = r
    while True:
        j += 1
        term = term * y / j
        total = total + term
        live = total > 0
        if not np.any(term[live] > SERIES_CUTOFF * total[live]):
            break
    return total


class DegreeDistribution:
    """Probability law of a node degree. Immutable after construction."""

    family: str = ""

    # subclasses set these
    mean: float
    second_moment: float

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    @property
    def factorial_moment2(self) -> float:
        return self.second_moment - self.mean

    def pgf(self, x, order: int = 0):
        raise NotImplementedError

    def pmf(self, j: int) -> float:
        raise NotImplementedError

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and probabilities (tail below 1e-16 dropped for infinite laws)."""
        raise NotImplementedError

    @property
    def max_degree(self) -> int | None:
        """Largest support point, or None for infinite support."""
        return None

    @property
    def is_degenerate(self) -> bool:
        """True when the law is a single atom (zero variance)."""
        support, probs = self.table()
        return int(np.count_nonzero(probs > GCD_ATOM_FLOOR)) == 1

    def sample(self, rng: np.random.Generator, size=None):
        support, probs = self.table()
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        u = rng.random(size)
        idx = np.searchsorted(cdf, u, side="right")
        idx = np.minimum(idx, len(support) - 1)
        out = support[idx]
        return int(out) if size is None else out.astype(np.int64)

    def gcd_support(self) -> int:
        support, probs = self.table()
        atoms = [int(j) for j, p in zip(support, probs) if p >= GCD_ATOM_FLOOR]
        if not atoms:
            raise InvalidSpec("empty support")
        g = reduce(math.gcd, atoms, 0)
        return max(g, 1)

    def size_biased(self) -> "DegreeDistribution":
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def _check_order(self, order: int) -> None:
        if order < 0 or order > MAX_ORDER:
            raise UnsupportedOrder(f"derivative order {order} not in 0..{MAX_ORDER}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, DegreeDistribution) and self.describe() == other.describe()

    def __hash__(self) -> int:
        return hash(self.describe())


def _falling(j: np.ndarray, order: int) -> np.ndarray:
    out = np.ones_like(j, dtype=float)
    for i in range(order):
        out = out * (j - i)
    return out


class FinitePmf(DegreeDistribution):
    """Law with finitely many atoms; backs both ``pmf:`` and ``pgf:`` specs."""

    def __init__(self, atoms: dict[int, float], family: str = "pmf"):
        if not atoms:
            raise InvalidSpec("empty pmf")
        items = sorted(atoms.items())
        for j, p in items:
            if int(j) != j or j < 0:
                raise InvalidSpec(f"degree {j!r} is not a nonnegative integer")
            if p < 0:
                raise InvalidSpec(f"negative probability {p} at degree {j}")
        total = math.fsum(p for _, p in items)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InvalidSpec(f"probabilities sum to {total}, not 1")
        items = [(int(j), float(p) / total) for j, p in items if p > 0]
        if not items:
            raise InvalidSpec("empty support")
        self.family = family
        self._support = np.array([j for j, _ in items], dtype=np.int64)
        self._probs = np.array([p for _, p in items], dtype=float)
        self.mean = math.fsum(j * p for j, p in items)
        self.second_moment = math.fsum(j * j * p for j, p in items)

    def pgf(self, x, order: int = 0):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        mask = self._support >= order
        j = self._support[mask]
        coef = self._probs[mask] * _falling(j.astype(float), order)
        powers = j - order
        # Horner would need a dense coefficient vector; supports are small
        val = np.zeros_like(x)
        for c, e in zip(coef, powers):
            val = val + c * x**e
        return float(val) if val.ndim == 0 else val

    def pmf(self, j: int) -> float:
        hit = np.nonzero(self._support == j)[0]
        return float(self._probs[hit[0]]) if len(hit) else 0.0

    def table(self):
        return self._support.copy(), self._probs.copy()

    @property
    def max_degree(self) -> int:
        return int(self._support[-1])

    @property
    def atoms(self) -> dict[int, float]:
        return {int(j): float(p) for j, p in zip(self._support, self._probs)}

    def sample(self, rng, size=None):
        if len(self._support) == 1:
            if size is None:
                return int(self._support[0])
            return np.full(size, self._support[0], dtype=np.int64)
        return super().sample(rng, size)

    def size_biased(self):
        if self.mean <= 0:
            raise DegenerateDistribution("size-biasing needs a positive mean")
        atoms = {int(j): j * p / self.mean for j, p in zip(self._support, self._probs) if j > 0}
        return FinitePmf(atoms, family="pmf")

    def describe(self) -> str:
        if self.family == "pgf":
            coeffs = np.zeros(self.max_degree + 1)
            coeffs[self._support] = self._probs
            return "pgf:[" + ",".join(repr(float(c)) for c in coeffs) + "]"
        return "pmf:" + ",".join(f"{j}={p!r}" for j, p in self.atoms.items())


class PointMass(FinitePmf):
    def __init__(self, k0: int):
        if int(k0) != k0 or k0 < 0:
            raise InvalidSpec(f"point mass needs a nonnegative integer, got {k0!r}")
        super().__init__({int(k0): 1.0}, family="point")
        self.k0 = int(k0)

    def pgf(self, x, order: int = 0):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        if order > self.k0:
            val = np.zeros_like(x)
        else:
            val = float(_falling(np.array(float(self.k0)), order)) * x ** (self.k0 - order)
        return float(val) if np.ndim(val) == 0 else val

    def size_biased(self):
        if self.k0 == 0:
            raise DegenerateDistribution("size-biasing needs a positive mean")
        return PointMass(self.k0)

    def describe(self) -> str:
        return f"point:{self.k0}"


class TruncatedPoisson(DegreeDistribution):
    """Poisson law conditioned on being at least ``ell``: P[j] = lam^j/j! / h_ell(lam)."""

    family = "po"

    def __init__(self, ell: int, lam: float):
        if int(ell) != ell or ell < 0:
            raise InvalidSpec(f"truncation point must be a nonnegative integer, got {ell!r}")
        if not lam > 0:
            raise InvalidSpec(f"Poisson rate must be positive, got {lam!r}")
        self.ell = int(ell)
        self.lam = float(lam)
        self._norm = float(h_series(self.ell, self.lam))
        self.mean = self.lam * float(h_series(self.ell - 1, self.lam)) / self._norm
        ff2 = self.lam**2 * float(h_series(self.ell - 2, self.lam)) / self._norm
        self.second_moment = ff2 + self.mean
        self._table = None

    def pgf(self, x, order: int = 0):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        val = self.lam**order * h_series(self.ell - order, self.lam * x) / self._norm
        return float(val) if val.ndim == 0 else val

    def pmf(self, j: int) -> float:
        if j < self.ell:
            return 0.0
        return math.exp(j * math.log(self.lam) - math.lgamma(j + 1) - math.log(self._norm))

    def table(self):
        if self._table is None:
            js = []
            ps = []
            j = self.ell
            tail_seen = 0.0
            while True:
                p = self.pmf(j)
                js.append(j)
                ps.append(p)
                tail_seen += p
                if j > self.lam and p < SERIES_CUTOFF * tail_seen:
                    break
                j += 1
            self._table = (np.array(js, dtype=np.int64), np.array(ps, dtype=float))
        s, p = self._table
        return s.copy(), p.copy()

    def sample(self, rng, size=None):
        if self.ell == 0:
            out = rng.poisson(self.lam, size)
            return int(out) if size is None else out.astype(np.int64)
        return super().sample(rng, size)

    def gcd_support(self) -> int:
        return 1

    def size_biased(self):
        return Shifted(TruncatedPoisson(max(self.ell - 1, 0), self.lam), 1)

    def describe(self) -> str:
        if self.ell == 0:
            return f"po:{self.lam!r}"
        return f"po:>={self.ell}:lambda={self.lam!r}"


class Shifted(DegreeDistribution):
    """Law of ``base + shift``; realises the size-biased truncated Poisson."""

    def __init__(self, base: DegreeDistribution, shift: int):
        self.base = base
        self.shift = int(shift)
        self.family = "shift"
        self.mean = base.mean + self.shift
        self.second_moment = base.second_moment + 2 * self.shift * base.mean + self.shift**2

    def pgf(self, x, order: int = 0):
        self._check_order(order)
        x = np.asarray(x, dtype=float)
        # Leibniz rule on x^s * B(x)
        total = np.zeros_like(x)
        s = self.shift
        for i in range(order + 1):
            if i > s:
                break
            xs = math.comb(order, i) * float(_falling(np.array(float(s)), i)) * x ** (s - i)
            total = total + xs * self.base.pgf(x, order - i)
        return float(total) if total.ndim == 0 else total

    def pmf(self, j: int) -> float:
        return self.base.pmf(j - self.shift)

    def table(self):
        s, p = self.base.table()
        return s + self.shift, p

    @property
    def max_degree(self):
        m = self.base.max_degree
        return None if m is None else m + self.shift

    def sample(self, rng, size=None):
        return self.base.sample(rng, size) + self.shift

    def size_biased(self):
        s, p = self.table()
        return FinitePmf({int(j): float(j * q / self.mean) for j, q in zip(s, p) if j > 0})

    def describe(self) -> str:
        return f"shift:{self.shift}:{self.base.describe()}"


@dataclass(frozen=True)
class SizeBiasedDistribution:
    """Size-biased law ``P[X^=l] = l P[X=l] / E[X]`` together with its base."""

    base: DegreeDistribution
    law: DegreeDistribution = field(repr=False)

    def pmf(self, j: int) -> float:
        return self.law.pmf(j)

    @property
    def mean(self) -> float:
        return self.law.mean


# ---------------------------------------------------------------------------
# spec-level operations


def solve_truncated_poisson_rate(ell: int, target_mean: float, tol: float = 1e-10) -> float:
    """Rate ``lam`` of ``Po_{>=ell}(lam)`` whose mean equals ``target_mean``.

    The mean ``lam * h_{ell-1}(lam) / h_ell(lam)`` increases strictly from
    ``ell`` (as lam -> 0) to infinity, so bisection applies.
    """
    if ell < 0 or int(ell) != ell:
        raise InvalidSpec(f"bad truncation point {ell!r}")
    if ell == 0:
        if target_mean <= 0:
            raise InfeasibleMean(f"Poisson mean must be positive, got {target_mean}")
        return float(target_mean)
    if not target_mean > ell:
        raise InfeasibleMean(f"mean of Po_>={ell} exceeds {ell}; target {target_mean} infeasible")

    def mean_at(lam):
        return lam * float(h_series(ell - 1, lam)) / float(h_series(ell, lam))

    lo, hi = 0.0, max(float(target_mean), 1.0)
    while mean_at(hi) < target_mean:
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mean_at(mid) < target_mean:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    if abs(mean_at(lam) - target_mean) > tol * max(1.0, target_mean):
        # both bracket ends are within one ulp; take the better one
        lam = min((lo, hi), key=lambda v: abs(mean_at(v) - target_mean))
    return lam


def _parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidSpec(f"not a number: {text!r}") from exc


def parse_distribution(spec: str) -> DegreeDistribution:
    """Build a distribution from the text grammar described in the module docstring."""
    if not isinstance(spec, str):
        raise InvalidSpec(f"expected a string, got {type(spec).__name__}")
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    head = head.strip().lower()
    if head == "point":
        try:
            return PointMass(int(rest))
        except ValueError as exc:
            raise InvalidSpec(f"bad point mass {spec!r}") from exc
    if head == "po":
        parts = [p.strip() for p in rest.split(":")]
        if len(parts) == 1:
            mean = _parse_number(parts[0])
            if mean <= 0:
                raise InfeasibleMean(f"Poisson mean must be positive in {spec!r}")
            return TruncatedPoisson(0, mean)
        if len(parts) != 2 or not parts[0].startswith(">="):
            raise InvalidSpec(f"bad truncated Poisson spec {spec!r}")
        try:
            ell = int(parts[0][2:])
        except ValueError as exc:
            raise InvalidSpec(f"bad truncation in {spec!r}") from exc
        key, _, value = parts[1].partition("=")
        key = key.strip().lower()
        if key == "mean":
            return TruncatedPoisson(ell, solve_truncated_poisson_rate(ell, _parse_number(value)))
        if key in ("lambda", "lam", "rate"):
            return TruncatedPoisson(ell, _parse_number(value))
        raise InvalidSpec(f"expected mean= or lambda= in {spec!r}")
    if head == "pmf":
        atoms: dict[int, float] = {}
        for item in rest.split(","):
            if not item.strip():
                continue
            j, eq, p = item.partition("=")
            if not eq:
                raise InvalidSpec(f"bad atom {item!r} in {spec!r}")
            try:
                deg = int(j)
            except ValueError as exc:
                raise InvalidSpec(f"bad degree {j!r}") from exc
            atoms[deg] = atoms.get(deg, 0.0) + _parse_number(p)
        return FinitePmf(atoms, family="pmf")
    if head == "pgf":
        body = rest.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise InvalidSpec(f"pgf coefficients must be bracketed: {spec!r}")
        coeffs = [_parse_number(c) for c in body[1:-1].split(",") if c.strip()]
        return FinitePmf({j: c for j, c in enumerate(coeffs)}, family="pgf")
    raise InvalidSpec(f"unknown distribution family in {spec!r}")


def make_distribution(spec) -> DegreeDistribution:
    """Accept a grammar string, an existing distribution, or a dict descriptor.

    Dict descriptors mirror the families: ``{"point": 3}``,
    ``{"po": {"ell": 2, "mean": 3.0}}``, ``{"pmf": {2: 0.88, 11: 0.12}}``,
    ``{"pgf": [0, 0, 0.88, 0.12]}``.
    """
    if isinstance(spec, DegreeDistribution):
        return spec
    if isinstance(spec, str):
        return parse_distribution(spec)
    if isinstance(spec, dict) and len(spec) == 1:
        (key, value), = spec.items()
        if key == "point":
            return PointMass(value)
        if key == "pmf":
            return FinitePmf({int(j): float(p) for j, p in value.items()}, family="pmf")
        if key == "pgf":
            return FinitePmf({j: float(c) for j, c in enumerate(value)}, family="pgf")
        if key == "po":
            ell = int(value.get("ell", 0))
            if "lambda" in value:
                return TruncatedPoisson(ell, float(value["lambda"]))
            if "mean" in value:
                return TruncatedPoisson(ell, solve_truncated_poisson_rate(ell, float(value["mean"])))
    raise InvalidSpec(f"unrecognised distribution descriptor {spec!r}")


def pgf(dist: DegreeDistribution, x, order: int = 0):
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise InvalidSpec("pgf argument must lie in [0, 1]")
    return dist.pgf(x, order)


def size_biased(dist: DegreeDistribution) -> SizeBiasedDistribution:
    if dist.mean <= 0:
        raise DegenerateDistribution("size-biasing needs a positive mean")
    return SizeBiasedDistribution(dist, dist.size_biased())


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    return int(dist.sample(rng))


def gcd_support(dist: DegreeDistribution) -> int:
    return dist.gcd_support()
