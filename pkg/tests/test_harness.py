from __future__ import annotations

import numpy as np
import pytest

from sparse_rank import harness as H
from sparse_rank.errors import InvalidSpec

SMALL = dict(ensemble="d=po:2.5;k=po:2.5", n=300, trials=6, seed=3)


class TestConfig:
    def test_from_text(self):
        cfg = H.ExperimentConfig.from_text(
            "# campaign\nensemble = d=po:2.5;k=po:2.5\nn = 500\nfields = 2, 5\n"
            "entries = ones\nchecks = verify,core  # two checks\ntol-rank = 0.05\nsimple = no\n"
        )
        assert cfg.n == 500 and cfg.fields == ("2", "5") and cfg.checks == ("verify", "core")
        assert cfg.tol_rank == 0.05 and cfg.simple is False
        assert cfg.variant_pairs() == [("2", "ones"), ("5", "ones")]

    def test_from_file(self, tmp_path):
        path = tmp_path / "c.conf"
        path.write_text("ensemble = d=po:2;k=point:3\ntrials = 4\n")
        assert H.ExperimentConfig.from_file(path).trials == 4

    def test_explicit_variants(self):
        cfg = H.ExperimentConfig(SMALL["ensemble"], variants=("2/ones", "7/chi:1", "3"))
        assert cfg.variant_pairs() == [("2", "ones"), ("7", "chi:1"), ("3", "ones")]

    @pytest.mark.parametrize("data", [
        {"ensemble": "d=po:2;k=point:3", "bogus": "1"},
        {"n": "10"},
        {"ensemble": "d=po:2;k=point:3", "checks": "nope"},
        {"ensemble": "d=po:2;k=point:3", "trials": "0"},
        {"ensemble": "d=po:2;k=point:3", "fields": "4"},
        {"ensemble": "d=po:2;k=point:3", "entries": "weird"},
        {"ensemble": "d=po:2;k=point:3", "reference": "other"},
        {"ensemble": "d=po:2;k=point:3", "simple": "maybe"},
        {"ensemble": "d=po:2", "n": "10"},
    ])
    def test_invalid(self, data):
        with pytest.raises(InvalidSpec):
            H.ExperimentConfig.from_mapping(data)

    def test_key_value_errors(self):
        with pytest.raises(InvalidSpec):
            H.parse_key_values("just some words")
        assert H.parse_key_values("a = b = c") == {"a": "b = c"}


class TestTrials:
    def test_seeds_distinct_and_stable(self):
        seeds = [H.trial_seed(0, t) for t in range(100)]
        assert len(set(seeds)) == 100
        assert seeds == [H.trial_seed(0, t) for t in range(100)]
        assert H.trial_seed(1, 0) != H.trial_seed(0, 1)

    def test_deterministic(self):
        cfg = H.ExperimentConfig(**SMALL)
        assert H.run_trials(cfg) == H.run_trials(cfg)

    def test_workers_do_not_change_results(self):
        cfg = H.ExperimentConfig(**SMALL)
        par = H.ExperimentConfig(**SMALL, workers=2)
        assert H.run_trials(cfg) == H.run_trials(par)

    def test_prefix_stable(self):
        short = H.run_trials(H.ExperimentConfig(**{**SMALL, "trials": 3}))
        assert short == H.run_trials(H.ExperimentConfig(**SMALL))[:3]

    def test_variants_share_graph(self):
        cfg = H.ExperimentConfig(**SMALL, fields=("2", "5"))
        recs = H.run_trials(cfg)
        for a, b in zip(recs[::2], recs[1::2]):
            assert (a.trial, a.m, a.core_vars) == (b.trial, b.m, b.core_vars)
            assert (a.field, b.field) == ("2", "5")

    def test_stderr_shrinks(self):
        small = H.aggregate(H.run_trials(H.ExperimentConfig(**{**SMALL, "n": 200, "trials": 30})))
        large = H.aggregate(H.run_trials(H.ExperimentConfig(**{**SMALL, "n": 3200, "trials": 30})))
        assert large.stderr_rank_fraction < small.stderr_rank_fraction / 2


class TestRunners:
    def test_verify(self):
        rep = H.run_verify(H.ExperimentConfig(**SMALL, tol_rank=0.05))
        assert rep.kind == "verify" and len(rep.comparisons) == 1
        c = rep.comparisons[0]
        assert c.expected == pytest.approx(rep.prediction.rank_fraction)
        assert rep.passed == c.passed

    def test_reference_closed_forms(self):
        cfg = H.ExperimentConfig(**SMALL, reference="bipartite-adjacency")
        pred = H.formula.rank_prediction(cfg.ensemble_spec())
        assert H.reference_rank(cfg, pred) == pytest.approx(pred.rank_fraction, abs=1e-9)

    def test_field_invariance_needs_two(self):
        with pytest.raises(InvalidSpec):
            H.run_field_invariance(H.ExperimentConfig(**SMALL))

    def test_field_invariance(self):
        rep = H.run_field_invariance(H.ExperimentConfig(**SMALL, fields=("2", "3", "5")))
        assert len(rep.comparisons) == 3

    def test_core_flags_hypothesis(self):
        cfg = H.ExperimentConfig("d=pmf:2=22/25,11=3/25;k=point:3", n=999, trials=2, checks=("core",))
        (rep,) = H.run_config(cfg)
        assert rep.flags == ["hypothesis-violated"]
        assert all(not c.enforced for c in rep.comparisons)
        assert rep.passed

    def test_failing_comparison(self):
        c = H.Comparison("x", 0.5, 0.4, 0.01)
        assert not c.passed and c.line().startswith("FAIL")
        assert H.Comparison("x", 0.5, 0.4, 0.01, enforced=False).line().startswith("INFO")


class TestCsv:
    def test_roundtrip(self):
        rep = H.run_verify(H.ExperimentConfig(**SMALL))
        text = H.emit_report(rep)
        records, aggs = H.parse_report(text)
        assert records == rep.records
        agg = rep.aggregates()[0]
        assert len(aggs) == 1
        assert aggs[0]["trials"] == SMALL["trials"]
        assert aggs[0]["mean_rank_fraction"] == agg.mean_rank_fraction
        assert aggs[0]["stderr_rank_fraction"] == agg.stderr_rank_fraction

    def test_header_only(self):
        rep = H.ExperimentReport("verify", H.ExperimentConfig(**SMALL))
        text = H.emit_report(rep)
        assert text.strip().split(",") == H.CSV_COLUMNS
        assert H.parse_report(text) == ([], [])

    def test_core_only_rows(self):
        rep = H.run_core(H.ExperimentConfig(**SMALL, checks=("core",)))
        records, aggs = H.parse_report(H.emit_report(rep))
        assert all(r.rank is None and r.core_vars is not None for r in records)
        assert aggs[0]["mean_rank_fraction"] is None
        assert aggs[0]["mean_core_var_fraction"] == pytest.approx(np.mean([r.core_vars / r.n for r in records]))

    def test_pretty(self):
        rep = H.run_verify(H.ExperimentConfig(**SMALL))
        text = H.emit_report(rep, "pretty")
        assert "predicted rank/n=" in text and "rank/n vs formula" in text
        with pytest.raises(InvalidSpec):
            H.emit_report(rep, "xml")
