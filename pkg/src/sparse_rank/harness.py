"""Monte Carlo campaigns: sampled ranks and cores against the predicted limits.

Every trial draws its randomness from a seed derived from ``(master seed,
trial index)``, so a report is a pure function of its configuration whether
trials run serially or on a process pool.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import formula
from .errors import InvalidSpec, SamplingFailure
from .formula import EnsembleSpec, RankPrediction
from .linalg import FieldSpec, rank
from .peeling import two_core
from .sampler import EntryMap, sample_ensemble_graph, sample_matrix

CHECKS = ("verify", "field-invariance", "core")
REFERENCES = ("formula", "bipartite-adjacency", "fixed-row-weight")


def _split_list(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise InvalidSpec(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One campaign. ``variants`` are ``field/entries`` pairs; when empty they
    are the product of ``fields`` and ``entries``."""

    ensemble: str
    n: int = 1000
    trials: int = 20
    fields: tuple = ("2",)
    entries: tuple = ("ones",)
    variants: tuple = ()
    checks: tuple = ("verify",)
    seed: int = 0
    tol_rank: float = 0.02
    tol_core: float = 0.01
    reference: str = "formula"
    simple: bool = True
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidSpec("trials must be at least 1")
        if self.n < 1:
            raise InvalidSpec("n must be at least 1")
        if not (self.tol_rank > 0 and self.tol_core > 0):
            raise InvalidSpec("tolerances must be positive")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise InvalidSpec(f"unknown checks {sorted(bad)}; choose from {CHECKS}")
        if self.reference not in REFERENCES:
            raise InvalidSpec(f"unknown reference {self.reference!r}; choose from {REFERENCES}")
        EnsembleSpec.parse(self.ensemble)
        for f, e in self.variant_pairs():
            FieldSpec.parse(f)
            EntryMap.parse(e)

    _CASTS = {
        "n": int, "trials": int, "seed": int, "workers": int,
        "tol_rank": float, "tol_core": float, "simple": _parse_bool,
        "fields": _split_list, "entries": _split_list, "variants": _split_list, "checks": _split_list,
    }

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = key.strip().replace("-", "_")
            if name not in known:
                raise InvalidSpec(f"unknown config key {key!r}")
            if value is None:
                continue
            cast = cls._CASTS.get(name)
            kwargs[name] = cast(value) if cast else str(value).strip()
        if "ensemble" not in kwargs:
            raise InvalidSpec("config needs an ensemble")
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_key_values(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def variant_pairs(self) -> list[tuple[str, str]]:
        if self.variants:
            out = []
            for v in self.variants:
                f, sep, e = v.partition("/")
                out.append((f.strip(), e.strip() if sep else "ones"))
            return out
        return list(itertools.product(self.fields, self.entries))

    def ensemble_spec(self) -> EnsembleSpec:
        return EnsembleSpec.parse(self.ensemble)


def parse_key_values(text: str) -> dict:
    """``key = value`` per line; ``#`` starts a comment; the first ``=`` splits."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidSpec(f"line {lineno}: expected key = value")
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    n: int
    m: int
    field: str
    entries: str
    rank: int | None
    nullity: int | None
    core_vars: int | None
    core_checks: int | None

    @property
    def rank_fraction(self) -> float | None:
        return None if self.rank is None else self.rank / self.n


@dataclass(frozen=True)
class Comparison:
    name: str
    observed: float
    expected: float
    tolerance: float
    enforced: bool = True

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.expected) <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.enforced else "INFO")
        return (
            f"{status} {self.name}: observed={self.observed:.6f} expected={self.expected:.6f} "
            f"diff={abs(self.observed - self.expected):.6f} tol={self.tolerance:g}"
        )


@dataclass
class Aggregate:
    field: str
    entries: str
    trials: int
    mean_rank_fraction: float | None
    stderr_rank_fraction: float | None
    mean_core_var_fraction: float | None
    mean_core_check_fraction: float | None


@dataclass
class ExperimentReport:
    kind: str
    config: ExperimentConfig
    records: list = field(default_factory=list)
    prediction: RankPrediction | None = None
    reference_value: float | None = None
    comparisons: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons if c.enforced)

    def variants(self) -> list[tuple[str, str]]:
        seen = []
        for r in self.records:
            if (r.field, r.entries) not in seen:
                seen.append((r.field, r.entries))
        return seen

    def select(self, field_: str, entries: str) -> list[TrialRecord]:
        return [r for r in self.records if r.field == field_ and r.entries == entries]

    def aggregates(self) -> list[Aggregate]:
        return [aggregate(self.select(f, e), f, e) for f, e in self.variants()]


def _mean_se(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def aggregate(records: list[TrialRecord], field_: str = "", entries: str = "") -> Aggregate:
    ranks = [r.rank_fraction for r in records if r.rank is not None]
    mean, se = _mean_se(ranks)
    cv = [r.core_vars / r.n for r in records if r.core_vars is not None]
    cc = [r.core_checks / r.n for r in records if r.core_checks is not None]
    return Aggregate(
        field_, entries, len(records), mean, se,
        float(np.mean(cv)) if cv else None,
        float(np.mean(cc)) if cc else None,
    )


# ---------------------------------------------------------------------------
# trials


def trial_seed(master: int, trial: int) -> int:
    """64-bit seed for one trial, mixed from the master seed and trial index."""
    state = np.random.SeedSequence([master, trial]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _run_trial(args) -> list[TrialRecord]:
    cfg, trial, want_rank, want_core = args
    seed = trial_seed(cfg.seed, trial)
    graph_rng = np.random.default_rng([seed, 0])
    ens = cfg.ensemble_spec()
    try:
        g = sample_ensemble_graph(ens, cfg.n, graph_rng, simple=cfg.simple)
    except SamplingFailure as exc:
        exc.trial = trial
        raise
    core = two_core(g) if want_core else None
    out = []
    for v, (f, e) in enumerate(cfg.variant_pairs() if want_rank else [(cfg.variant_pairs()[0][0], "-")]):
        r = None
        if want_rank:
            mat = sample_matrix(g, FieldSpec.parse(f), EntryMap.parse(e), np.random.default_rng([seed, 1, v]))
            r = rank(mat)
        out.append(TrialRecord(
            trial=trial,
            seed=seed,
            n=g.n_vars,
            m=g.n_checks,
            field=f,
            entries=e,
            rank=r,
            nullity=None if r is None else g.n_vars - r,
            core_vars=None if core is None else core.core_vars,
            core_checks=None if core is None else core.core_checks,
        ))
    return out


def run_trials(cfg: ExperimentConfig, want_rank: bool = True, want_core: bool = True) -> list[TrialRecord]:
    """All trials of ``cfg`` in trial order (optionally on ``cfg.workers`` processes)."""
    jobs = [(cfg, t, want_rank, want_core) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(_run_trial, jobs))
    else:
        batches = [_run_trial(j) for j in jobs]
    return [rec for batch in batches for rec in batch]


def reference_rank(cfg: ExperimentConfig, prediction: RankPrediction) -> float:
    ens = cfg.ensemble_spec()
    if cfg.reference == "formula":
        return prediction.rank_fraction
    if cfg.reference == "bipartite-adjacency":
        return formula.bipartite_adjacency_rank(ens.d)
    return formula.fixed_row_weight_rank(ens.d, int(round(ens.k)))


def run_verify(cfg: ExperimentConfig) -> ExperimentReport:
    """Mean sampled rank fraction of the first variant against the limit."""
    cfg1 = replace(cfg, variants=("/".join(cfg.variant_pairs()[0]),))
    pred = formula.rank_prediction(cfg.ensemble_spec())
    report = ExperimentReport("verify", cfg1, prediction=pred)
    report.records = run_trials(cfg1, want_rank=True, want_core=True)
    report.reference_value = reference_rank(cfg, pred)
    agg = report.aggregates()[0]
    report.comparisons.append(
        Comparison(f"rank/n vs {cfg.reference}", agg.mean_rank_fraction, report.reference_value, cfg.tol_rank)
    )
    return report


def run_field_invariance(cfg: ExperimentConfig) -> ExperimentReport:
    """Same graphs under every field/entry variant; all pairwise mean differences."""
    pairs = cfg.variant_pairs()
    if len(pairs) < 2:
        raise InvalidSpec("field invariance needs at least two field/entry variants")
    report = ExperimentReport("field-invariance", cfg, prediction=formula.rank_prediction(cfg.ensemble_spec()))
    report.records = run_trials(cfg, want_rank=True, want_core=False)
    aggs = report.aggregates()
    for a, b in itertools.combinations(aggs, 2):
        report.comparisons.append(Comparison(
            f"rank/n {a.field}/{a.entries} vs {b.field}/{b.entries}",
            a.mean_rank_fraction, b.mean_rank_fraction, cfg.tol_rank,
        ))
    return report


def run_core(cfg: ExperimentConfig) -> ExperimentReport:
    """Peel sampled graphs and compare core fractions against the fixed point.

    When the prediction's stability hypothesis fails the comparisons are
    reported but not enforced and the report carries ``hypothesis-violated``.
    """
    pred = formula.rank_prediction(cfg.ensemble_spec())
    report = ExperimentReport("core", cfg, prediction=pred)
    report.records = run_trials(cfg, want_rank=False, want_core=True)
    enforced = pred.core_hypothesis == "ok"
    if not enforced:
        report.flags.append("hypothesis-violated")
    agg = aggregate(report.records)
    report.comparisons.append(Comparison("core vars/n", agg.mean_core_var_fraction, pred.core_var_fraction,
                                         cfg.tol_core, enforced))
    report.comparisons.append(Comparison("core checks/n", agg.mean_core_check_fraction, pred.core_check_fraction,
                                         cfg.tol_core, enforced))
    return report


RUNNERS = {"verify": run_verify, "field-invariance": run_field_invariance, "core": run_core}


def run_config(cfg: ExperimentConfig) -> list[ExperimentReport]:
    return [RUNNERS[c](cfg) for c in cfg.checks]


# ---------------------------------------------------------------------------
# output

RECORD_COLUMNS = [f.name for f in fields(TrialRecord)]
CSV_COLUMNS = ["row"] + RECORD_COLUMNS + ["rank_fraction", "stderr_rank_fraction", "core_var_fraction",
                                          "core_check_fraction"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(report: ExperimentReport, fmt: str = "csv") -> str:
    """CSV: one ``trial`` row per record, then one ``aggregate`` row per variant."""
    if fmt == "pretty":
        return _pretty(report)
    if fmt != "csv":
        raise InvalidSpec(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.records:
        row = asdict(r)
        w.writerow(["trial"] + [_fmt(row[c]) for c in RECORD_COLUMNS]
                   + [_fmt(r.rank_fraction), "", _fmt(None if r.core_vars is None else r.core_vars / r.n),
                      _fmt(None if r.core_checks is None else r.core_checks / r.n)])
    for a in report.aggregates():
        blank = {c: "" for c in RECORD_COLUMNS}
        blank.update(field=a.field, entries=a.entries, trial=str(a.trials))
        w.writerow(["aggregate"] + [blank[c] for c in RECORD_COLUMNS]
                   + [_fmt(a.mean_rank_fraction), _fmt(a.stderr_rank_fraction),
                      _fmt(a.mean_core_var_fraction), _fmt(a.mean_core_check_fraction)])
    return buf.getvalue()


def _pretty(report: ExperimentReport) -> str:
    lines = [f"{report.kind}: {report.config.ensemble}  n={report.config.n}  trials={report.config.trials}"]
    if report.prediction is not None:
        p = report.prediction
        lines.append(
            f"  predicted rank/n={p.rank_fraction:.6f}  alpha*={p.alpha_star:.6f}  rho={p.rho:.6f}  "
            f"core=({p.core_var_fraction:.6f}, {p.core_check_fraction:.6f})  {p.tightness.value}"
        )
    for a in report.aggregates():
        parts = [f"  [{a.field}/{a.entries}] trials={a.trials}"]
        if a.mean_rank_fraction is not None:
            parts.append(f"rank/n={a.mean_rank_fraction:.6f} +- {a.stderr_rank_fraction:.6f}")
        if a.mean_core_var_fraction is not None:
            parts.append(f"core=({a.mean_core_var_fraction:.6f}, {a.mean_core_check_fraction:.6f})")
        lines.append("  ".join(parts))
    for flag in report.flags:
        lines.append(f"  flag: {flag}")
    lines.extend("  " + c.line() for c in report.comparisons)
    return "\n".join(lines) + "\n"


def _cast_record_value(name: str, text: str):
    if text == "":
        return None
    if name in ("field", "entries"):
        return text
    return int(text)


def parse_report(text: str) -> tuple[list[TrialRecord], list[dict]]:
    """Inverse of the CSV form of :func:`emit_report`: (records, aggregate rows)."""
    reader = csv.DictReader(io.StringIO(text))
    records, aggs = [], []
    for row in reader:
        if row["row"] == "trial":
            records.append(TrialRecord(**{c: _cast_record_value(c, row[c]) for c in RECORD_COLUMNS}))
        else:
            aggs.append({
                "field": row["field"],
                "entries": row["entries"],
                "trials": int(row["trial"]),
                "mean_rank_fraction": float(row["rank_fraction"]) if row["rank_fraction"] else None,
                "stderr_rank_fraction": float(row["stderr_rank_fraction"]) if row["stderr_rank_fraction"] else None,
                "mean_core_var_fraction": float(row["core_var_fraction"]) if row["core_var_fraction"] else None,
                "mean_core_check_fraction": float(row["core_check_fraction"]) if row["core_check_fraction"] else None,
            })
    return records, aggs
