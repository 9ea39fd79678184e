"""Command line entry point ``sparse-rank``.

Exit status: 0 when every check passes, 1 when a tolerance check fails,
2 on bad input or any other error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import formula, harness, linalg, peeling, pinning, sampler
from ._backend import BACKEND
from .errors import SparseRankError
from .formula import EnsembleSpec

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _merge_config(args: argparse.Namespace, keys) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    data = {}
    if getattr(args, "config", None):
        data.update({k.replace("-", "_"): v for k, v in
                     harness.parse_key_values(Path(args.config).read_text(encoding="utf-8")).items()})
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return data


def _ensemble(args, data=None) -> EnsembleSpec:
    text = (data or {}).get("ensemble") or getattr(args, "ensemble", None)
    if not text:
        raise SparseRankError("an ensemble is required (--ensemble 'd=...;k=...')")
    return EnsembleSpec.parse(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_predict(args) -> int:
    data = _merge_config(args, ["ensemble"])
    pred = formula.rank_prediction(_ensemble(args, data))
    row = pred.as_row()
    if args.format == "csv":
        _write(_csv_text(list(pred.FIELDS), [[row[f] for f in pred.FIELDS]]), args.output)
    else:
        _write("".join(f"{f:>20}: {row[f]}\n" for f in pred.FIELDS), args.output)
    return EXIT_OK


def cmd_curve(args) -> int:
    data = _merge_config(args, ["ensemble", "points"])
    pts = formula.curve(_ensemble(args, data), int(data.get("points", 101)))
    _write(_csv_text(["alpha", "phi"], [[repr(a), repr(v)] for a, v in pts]), args.output)
    return EXIT_OK


def cmd_sample(args) -> int:
    data = _merge_config(args, ["ensemble", "n", "field", "entries", "seed"])
    rng = np.random.default_rng(int(data.get("seed", 0)))
    m = sampler.sample_ensemble_matrix(
        _ensemble(args, data), int(data.get("n", 1000)), data.get("field", "2"),
        data.get("entries", "ones"), rng, simple=args.simple,
    )
    _write(linalg.write_sparse(m), args.output)
    return EXIT_OK


def _read_matrix(path: str) -> linalg.SparseMatrix:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return linalg.read_sparse(text)


def cmd_rank(args) -> int:
    m = _read_matrix(args.matrix)
    r = linalg.rank(m, use_peeling=not args.no_peeling)
    header = ["n_rows", "n_cols", "field", "rank", "nullity", "rank_fraction"]
    row = [m.n_rows, m.n_cols, m.field.describe(), r, m.n_cols - r, repr(r / m.n_cols if m.n_cols else 0.0)]
    if args.exact:
        header.append("rank_exact")
        row.append(linalg.rank_rational_exact(m))
    _write(_csv_text(header, [row]), args.output)
    return EXIT_OK


def cmd_core(args) -> int:
    data = _merge_config(args, ["ensemble", "n", "seed"])
    ens = None
    if args.matrix:
        g = sampler.TannerGraph.from_matrix(_read_matrix(args.matrix))
    else:
        ens = _ensemble(args, data)
        rng = np.random.default_rng(int(data.get("seed", 0)))
        g = sampler.sample_ensemble_graph(ens, int(data.get("n", 1000)), rng)
    core = peeling.two_core(g)
    header = ["n", "m", "core_vars", "core_checks", "core_var_fraction", "core_check_fraction", "rounds"]
    row = [g.n_vars, g.n_checks, core.core_vars, core.core_checks, repr(core.var_fraction),
           repr(core.check_fraction), core.rounds]
    if ens is not None:
        pred = formula.rank_prediction(ens)
        header += ["predicted_var_fraction", "predicted_check_fraction", "rho", "core_hypothesis"]
        row += [repr(pred.core_var_fraction), repr(pred.core_check_fraction), repr(pred.rho), pred.core_hypothesis]
    _write(_csv_text(header, [row]), args.output)
    return EXIT_OK


VERIFY_KEYS = ["ensemble", "n", "trials", "fields", "entries", "variants", "checks", "seed", "tol_rank",
               "tol_core", "reference", "workers", "output"]


def cmd_verify(args) -> int:
    data = _merge_config(args, VERIFY_KEYS)
    if args.multi:
        data["simple"] = False
    cfg = harness.ExperimentConfig.from_mapping(data)
    reports = harness.run_config(cfg)
    text = "".join(harness.emit_report(r, args.format) for r in reports)
    _write(text, cfg.output)
    for r in reports:
        for c in r.comparisons:
            print(c.line(), file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_pin(args) -> int:
    data = _merge_config(args, ["ensemble", "n", "trials", "delta", "ell", "budget", "seed", "field", "entries"])
    delta = float(data.get("delta", 0.5))
    ell = int(data.get("ell", 2))
    budget = int(data["budget"]) if "budget" in data else pinning.default_pin_budget(delta, ell)
    trials = int(data.get("trials", 20))
    master = int(data.get("seed", 0))
    fixed = _read_matrix(args.matrix) if args.matrix else None
    ens = None if fixed is not None else _ensemble(args, data)
    rows = []
    free = 0
    exact_zero = True
    for t in range(trials):
        seed = harness.trial_seed(master, t)
        rng = np.random.default_rng(seed)
        a = fixed if fixed is not None else sampler.sample_ensemble_matrix(
            ens, int(data.get("n", 20)), data.get("field", "2"), data.get("entries", "ones"), rng)
        theta = pinning.draw_theta(budget, rng)
        pinned = linalg.pin(a, theta, rng)
        count = linalg.count_proper_relations(pinned, ell)
        # theta = 0 reuses the already pinned matrix
        ind = pinning.independence_experiment(pinned, 0, rng)
        n = a.n_cols
        free += count <= delta * n**ell
        exact_zero &= ind.nonproper_exact_zero
        rows.append([seed, theta, len(linalg.frozen_set(pinned)), count, repr(ind.pair_tv_sum)])
    _write(_csv_text(["seed", "theta", "frozen", "proper_relations", "pair_tv_sum"], rows), args.output)
    frac = free / trials
    sigma = (delta * (1 - delta) / trials) ** 0.5
    ok = frac >= 1 - delta - 3 * sigma and exact_zero
    print(f"{'PASS' if frac >= 1 - delta - 3 * sigma else 'FAIL'} freeness: fraction_free={frac:.4f} "
          f"bound={1 - delta - 3 * sigma:.4f} budget={budget}", file=sys.stderr)
    print(f"{'PASS' if exact_zero else 'FAIL'} non-proper pairs independent", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparse-rank", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, ensemble=True):
        sp.add_argument("--config", help="key = value file; flags override it")
        if ensemble:
            sp.add_argument("--ensemble", help="'d=<dist>;k=<dist>'")
        sp.add_argument("--output", "-o", help="write to this file instead of stdout")
        return sp

    sp = common(sub.add_parser("predict", help="limit rank fraction, rho, 2-core fractions"))
    sp.add_argument("--format", choices=["csv", "pretty"], default="csv")
    sp.set_defaults(func=cmd_predict)

    sp = common(sub.add_parser("curve", help="Phi sampled on a uniform grid, as CSV"))
    sp.add_argument("--points", type=int)
    sp.set_defaults(func=cmd_curve)

    sp = common(sub.add_parser("sample", help="sample a matrix, write SPARSE text"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--field")
    sp.add_argument("--entries", help="ones | uniform | chi:<seed>")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--simple", dest="simple", action="store_true", default=True)
    sp.add_argument("--multi", dest="simple", action="store_false")
    sp.set_defaults(func=cmd_sample)

    sp = common(sub.add_parser("rank", help="exact rank of a SPARSE file"), ensemble=False)
    sp.add_argument("matrix", help="SPARSE file, or - for stdin")
    sp.add_argument("--no-peeling", action="store_true")
    sp.add_argument("--exact", action="store_true", help="also run exact rational elimination")
    sp.set_defaults(func=cmd_rank)

    sp = common(sub.add_parser("core", help="2-core of a file or a sampled graph"))
    sp.add_argument("--matrix")
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_core)

    sp = common(sub.add_parser("verify", help="Monte Carlo checks against the formula"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--fields")
    sp.add_argument("--entries")
    sp.add_argument("--variants", help="comma-separated field/entries pairs")
    sp.add_argument("--checks", help="comma-separated: " + ",".join(harness.CHECKS))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol-rank", dest="tol_rank", type=float)
    sp.add_argument("--tol-core", dest="tol_core", type=float)
    sp.add_argument("--reference", choices=harness.REFERENCES)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--multi", action="store_true", help="allow multigraphs")
    sp.add_argument("--format", choices=["csv", "pretty"], default="csv")
    sp.set_defaults(func=cmd_verify)

    sp = common(sub.add_parser("pin", help="pinning experiments, one CSV row per trial"))
    sp.add_argument("--matrix")
    sp.add_argument("--n", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--ell", type=int)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--field")
    sp.add_argument("--entries")
    sp.set_defaults(func=cmd_pin)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SparseRankError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
