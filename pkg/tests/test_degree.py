from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_rank.degree import (
    FinitePmf,
    PointMass,
    TruncatedPoisson,
    gcd_support,
    h_series,
    make_distribution,
    parse_distribution,
    pgf,
    sample_degree,
    size_biased,
    solve_truncated_poisson_rate,
)
from sparse_rank.errors import DegenerateDistribution, InfeasibleMean, InvalidSpec, UnsupportedOrder


def poisson_pmf(lam, j):
    return math.exp(-lam) * lam**j / math.factorial(j)


FAMILIES = [
    PointMass(3),
    PointMass(1),
    TruncatedPoisson(0, 2.5),
    TruncatedPoisson(2, 1.7),
    TruncatedPoisson(3, 0.4),
    parse_distribution("pmf:2=22/25,11=3/25"),
    parse_distribution("pgf:[0.1,0.2,0.3,0.4]"),
]


class TestConstruction:
    def test_point_mass(self):
        k = make_distribution("point:3")
        assert k.mean == 3
        assert k.pgf(0.5) == pytest.approx(0.125)
        assert k.pgf(0.3, 2) == pytest.approx(6 * 0.3)

    def test_polynomial_pgf_example(self):
        d = parse_distribution("pgf:[0,0,0.88,0,0,0,0,0,0,0,0,0.12]")
        assert d.atoms == pytest.approx({2: 22 / 25, 11: 3 / 25})
        assert d.mean == pytest.approx(77 / 25, abs=1e-12)
        x = 0.37
        assert d.pgf(x) == pytest.approx((22 * x**2 + 3 * x**11) / 25, abs=1e-15)

    def test_poisson_matches_series(self):
        d = make_distribution("po:2.5")
        for j in range(40):
            assert d.pmf(j) == pytest.approx(poisson_pmf(2.5, j), abs=1e-12)
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(d.pgf(x), np.exp(2.5 * (x - 1)), atol=1e-13)

    def test_grammar_variants(self):
        assert make_distribution("po:>=2:lambda=1.7") == TruncatedPoisson(2, 1.7)
        d = make_distribution("po:>=2:mean=3.0")
        assert d.mean == pytest.approx(3.0, abs=1e-10)
        assert make_distribution({"pmf": {1: 0.5, 3: 0.5}}).mean == pytest.approx(2.0)
        assert make_distribution({"po": {"ell": 0, "lambda": 2.0}}).mean == pytest.approx(2.0)

    @pytest.mark.parametrize("spec", ["pmf:1=-0.1,2=1.1", "pmf:1=0.5,2=0.4", "nope:3", "pgf:0.5,0.5", "point:x"])
    def test_invalid_specs(self, spec):
        with pytest.raises(InvalidSpec):
            parse_distribution(spec)

    def test_infeasible_mean(self):
        with pytest.raises(InfeasibleMean):
            make_distribution("po:>=3:mean=3.0")

    def test_sum_tolerance(self):
        FinitePmf({1: 0.5, 2: 0.5 + 5e-10})
        with pytest.raises(InvalidSpec):
            FinitePmf({1: 0.5, 2: 0.5 + 5e-9})


class TestPgf:
    def test_normalisation(self):
        for d in FAMILIES:
            assert pgf(d, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_order_limit(self):
        with pytest.raises(UnsupportedOrder):
            pgf(PointMass(3), 0.5, 4)

    def test_argument_range(self):
        with pytest.raises(InvalidSpec):
            pgf(PointMass(3), 1.5)

    def test_truncated_poisson_derivative(self):
        lam = 1.3
        d = TruncatedPoisson(2, lam)
        for x in (0.2, 0.5, 0.9):
            expected = lam * float(h_series(1, lam * x)) / float(h_series(2, lam))
            assert d.pgf(x, 1) == pytest.approx(expected, rel=1e-13)
            fd = (d.pgf(x + 1e-6) - d.pgf(x - 1e-6)) / 2e-6
            assert fd == pytest.approx(expected, abs=1e-6)

    def test_h_series_negative_is_exp(self):
        assert float(h_series(-1, 0.7)) == pytest.approx(math.exp(0.7))
        assert float(h_series(2, 0.7)) == pytest.approx(math.exp(0.7) - 1 - 0.7, rel=1e-13)

    @pytest.mark.parametrize("d", FAMILIES, ids=lambda d: d.describe())
    def test_derivatives_by_finite_difference(self, d):
        h = 1e-6
        for order in range(3):
            f = lambda t: d.pgf(t, order)  # noqa: E731
            for x in (0.0, 0.25, 0.5, 0.75, 1.0):
                if x == 0.0:
                    fd = (-3 * f(0.0) + 4 * f(h) - f(2 * h)) / (2 * h)
                elif x == 1.0:
                    fd = (3 * f(1.0) - 4 * f(1 - h) + f(1 - 2 * h)) / (2 * h)
                else:
                    fd = (f(x + h) - f(x - h)) / (2 * h)
                exact = d.pgf(x, order + 1)
                assert fd == pytest.approx(exact, rel=1e-6, abs=1e-6)

    @pytest.mark.parametrize("d", FAMILIES, ids=lambda d: d.describe())
    def test_moments_from_pgf(self, d):
        assert d.pgf(1.0, 1) == pytest.approx(d.mean, abs=1e-10)
        assert d.pgf(1.0, 2) == pytest.approx(d.factorial_moment2, abs=1e-9)
        support, probs = d.table()
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert (support * probs).sum() == pytest.approx(d.mean, abs=1e-10)


class TestSizeBias:
    def test_point_mass(self):
        assert size_biased(PointMass(4)).law == PointMass(4)

    def test_poisson_is_shifted(self):
        sb = size_biased(TruncatedPoisson(0, 2.2))
        for j in range(61):
            ref = poisson_pmf(2.2, j - 1) if j >= 1 else 0.0
            assert sb.pmf(j) == pytest.approx(ref, abs=1e-12)

    def test_explicit(self):
        sb = size_biased(FinitePmf({1: 0.5, 3: 0.5}))
        assert sb.pmf(1) == pytest.approx(0.25)
        assert sb.pmf(3) == pytest.approx(0.75)

    def test_zero_mean(self):
        with pytest.raises(DegenerateDistribution):
            size_biased(PointMass(0))

    @pytest.mark.parametrize("d", FAMILIES, ids=lambda d: d.describe())
    def test_mean_is_second_over_first(self, d):
        assert size_biased(d).mean == pytest.approx(d.second_moment / d.mean, abs=1e-10)

    @given(st.dictionaries(st.integers(0, 15), st.floats(0.01, 1.0), min_size=1, max_size=6))
    def test_size_bias_pmf(self, raw):
        total = sum(raw.values())
        d = FinitePmf({j: p / total for j, p in raw.items()})
        if d.mean == 0:
            return
        sb = size_biased(d)
        for j in raw:
            assert sb.pmf(j) == pytest.approx(j * d.pmf(j) / d.mean, abs=1e-12)


class TestSampling:
    def test_point_masses(self, rng):
        assert all(sample_degree(PointMass(4), rng) == 4 for _ in range(20))
        assert all(sample_degree(FinitePmf({2: 1.0}), rng) == 2 for _ in range(20))

    def test_poisson_mean(self):
        draws = TruncatedPoisson(0, 2.5).sample(np.random.default_rng(1), 10**6)
        assert abs(draws.mean() - 2.5) < 0.01

    def test_deterministic(self):
        d = parse_distribution("pmf:2=0.3,5=0.7")
        a = d.sample(np.random.default_rng(7), 100)
        b = d.sample(np.random.default_rng(7), 100)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("d", [TruncatedPoisson(2, 1.7), parse_distribution("pmf:2=22/25,11=3/25")],
                             ids=lambda d: d.describe())
    def test_empirical_pmf(self, d):
        n = 10**6
        draws = d.sample(np.random.default_rng(3), n)
        support, probs = d.table()
        counts = np.bincount(draws, minlength=support.max() + 1)
        for j, p in zip(support, probs):
            if p < 1e-3:
                continue
            sigma = math.sqrt(n * p * (1 - p))
            assert abs(counts[j] - n * p) <= 3 * sigma + 1


class TestGcd:
    def test_examples(self):
        assert gcd_support(PointMass(3)) == 3
        assert gcd_support(FinitePmf({4: 0.5, 6: 0.5})) == 2
        assert gcd_support(TruncatedPoisson(0, 1.0)) == 1

    def test_tiny_atoms_ignored(self):
        assert gcd_support(FinitePmf({4: 1 - 1e-13, 5: 1e-13})) == 4


class TestTruncatedPoissonRate:
    def test_plain_poisson(self):
        assert solve_truncated_poisson_rate(0, 2.0) == 2.0

    def test_mean_by_summation(self):
        lam = solve_truncated_poisson_rate(2, 3.0)
        js = np.arange(2, 200)
        w = np.exp(js * math.log(lam) - np.array([math.lgamma(j + 1) for j in js]))
        assert (js * w).sum() / w.sum() == pytest.approx(3.0, abs=1e-10)

    def test_infeasible(self):
        with pytest.raises(InfeasibleMean):
            solve_truncated_poisson_rate(3, 3.0)

    @settings(max_examples=50)
    @given(st.integers(0, 5), st.floats(0.05, 6.0))
    def test_inverse(self, ell, excess):
        target = ell + excess
        lam = solve_truncated_poisson_rate(ell, target)
        assert TruncatedPoisson(ell, lam).mean == pytest.approx(target, abs=1e-9 * max(1, target))
