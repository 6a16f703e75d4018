"""Command line front end: ``sievelab simulate | exact | limits | verify``.

Exit codes: 0 success, 1 failed test, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import List, Optional

import numpy as np

from . import acceptance, exact, limits, sim
from .errors import CapabilityError, NumericError, SieveError
from .laws import parse_law
from .scenario import Scenario, ScenarioError, TestSpec, load_scenario
from .stats import (GofReport, chi_square_gof, ks_one_sample, moment_z, summary_table,
                    tv_distance, write_jsonl)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(SieveError, ValueError):
    pass


def _law(text):
    try:
        return parse_law(text)
    except SieveError as exc:
        raise InputError(str(exc)) from exc


def _emit(summary: dict):
    print(json.dumps(summary, indent=2, default=float))


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    law = _law(args.law)
    stats_ = args.stat or list(sim.STATISTICS)
    if args.log_n is not None:
        return _simulate_log_n(args, law, stats_)
    if args.n is None and args.t is None:
        raise InputError("give --n, --t or --log-n")
    b = sim.batch_estimate(law, n=args.n, t=args.t, replicates=args.replicates, seed=args.seed,
                           statistics=tuple(stats_), method=args.method, workers=args.workers)
    if args.out:
        (b.to_csv if args.format == "csv" else b.to_json)(args.out)
    _emit(b.summary())
    return EXIT_OK


def _simulate_log_n(args, law, stats_):
    bad = [s for s in stats_ if s not in ("M", "Z")]
    if bad:
        raise InputError(f"--log-n supports only M and Z (the shortcut samplers), not {bad}")
    cols = {}
    if "M" in stats_:
        cols["M"] = sim.shortcut_sample_M(law, args.log_n, sim.child_rng(args.seed, 0),
                                          size=args.replicates)
    if "Z" in stats_:
        cols["log_Z"] = sim.shortcut_sample_Z(law, args.log_n, sim.child_rng(args.seed, 1),
                                              size=args.replicates, log=True)
    summary = {"schema": sim.SCHEMA, "law": str(law), "seed": args.seed,
               "replicates": args.replicates, "log_n": args.log_n, "moments": {}}
    for k, v in cols.items():
        x = np.asarray(v, dtype=float)
        summary["moments"][k] = {"mean": float(x.mean()),
                                 "se": float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else None}
    if args.out:
        if args.format == "csv":
            with open(args.out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(list(cols))
                for row in zip(*cols.values()):
                    w.writerow([int(v) if k == "M" else repr(float(v)) for k, v in zip(cols, row)])
        else:
            with open(args.out, "w") as fh:
                json.dump({**summary, "values": {k: np.asarray(v).tolist() for k, v in cols.items()}},
                          fh)
    _emit(summary)
    return EXIT_OK


# -- exact --------------------------------------------------------------------

def _exact_table(law, stat, n_max, k_max=None):
    if stat == "L":
        return exact.pmf_L(law, n_max, k_max)
    if stat == "K":
        return exact.pmf_K(law, n_max)
    if stat == "M":
        return exact.pmf_M(law, n_max, k_max)
    return exact.pmf_Z_table(law, n_max)


def cmd_exact(args) -> int:
    law = _law(args.law)
    if args.n_max < 0:
        raise InputError("--n-max must be >= 0")
    tab = _exact_table(law, args.stat, args.n_max, args.k_max)
    if args.out:
        (tab.to_csv if args.format == "csv" else tab.to_json)(args.out)
    meta = tab.metadata()
    meta["means"] = tab.means().tolist()
    _emit(meta)
    for w in tab.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


# -- limits -------------------------------------------------------------------

def _grid(text, discrete):
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError as exc:
        raise InputError(f"bad --grid {text!r}: expected lo:hi[:num]") from exc
    if len(parts) not in (2, 3) or parts[1] < parts[0]:
        raise InputError(f"bad --grid {text!r}: expected lo:hi[:num] with lo <= hi")
    if discrete:
        return np.arange(int(parts[0]), int(parts[1]) + 1)
    num = int(parts[2]) if len(parts) == 3 else 201
    return np.linspace(parts[0], parts[1], num)


def cmd_limits(args) -> int:
    try:
        handle = limits.parse_dist(args.dist)
    except SieveError as exc:
        raise InputError(str(exc)) from exc
    default = "0:30" if handle.discrete else "-10:10:201"
    grid = _grid(args.grid or default, handle.discrete)
    rows = handle.tabulate(grid)
    if args.out:
        if args.format == "csv":
            handle.to_csv(args.out, grid)
        else:
            with open(args.out, "w") as fh:
                json.dump({"schema": sim.SCHEMA, "dist": handle.kind,
                           "column": "pmf" if handle.discrete else "cdf",
                           "rows": [list(r) for r in rows]}, fh)
    _emit({"schema": sim.SCHEMA, "dist": handle.kind, "points": len(rows),
           "column": "pmf" if handle.discrete else "cdf",
           "first": rows[0][1] if rows else None, "last": rows[-1][1] if rows else None})
    return EXIT_OK


# -- verify -------------------------------------------------------------------

def _jittered(x, seed):
    return np.asarray(x, dtype=float) + sim.child_rng(seed, 2 ** 32 - 1).random(len(x)) - 0.5


def run_scenario(sc: Scenario) -> List[GofReport]:
    law = parse_law(sc.law)
    reports = []
    batches = {}
    for i, n in enumerate(sc.n or []):
        batches[("n", n)] = sim.batch_estimate(law, n=n, replicates=sc.replicates,
                                               seed=sc.seed + i, statistics=tuple(sc.statistics),
                                               method=sc.method)
    shortcut = {}
    for i, ln in enumerate(sc.log_n or []):
        if "M" in sc.statistics:
            shortcut[("M", ln)] = sim.shortcut_sample_M(
                law, ln, sim.child_rng(sc.seed, 2 * i), size=sc.replicates).astype(float)
        if "Z" in sc.statistics:
            shortcut[("Z", ln)] = sim.shortcut_sample_Z(
                law, ln, sim.child_rng(sc.seed, 2 * i + 1), size=sc.replicates, log=True)
    if sc.outputs.get("csv") and sc.n:
        batches[("n", sc.n[0])].to_csv(sc.outputs["csv"])
    if sc.outputs.get("json") and sc.n:
        batches[("n", sc.n[0])].to_json(sc.outputs["json"])
    for t in sc.tests:
        meta = {"name": f"{t.statistic} {t.kind} vs {t.target}", "law": sc.law,
                "n": t.n, "log_n": t.log_n, "seed": sc.seed}
        reports.append(_run_test(law, t, batches, shortcut, meta, sc.seed))
    return reports


def _run_test(law, t: TestSpec, batches, shortcut, meta, seed):
    if t.n is not None:
        b = batches[("n", t.n)]
        x = b.values[t.statistic]
        if t.target == "exact":
            if t.statistic == "Z":
                target_pmf = exact.pmf_Z(law, t.n) if t.n > 0 else np.array([1.0])
            else:
                target_pmf = _exact_table(law, t.statistic, t.n).pmf(t.n)
            handle = None
        else:
            handle = limits.parse_dist(t.target)
            target_pmf = None
        kind = t.kind
        if kind == "ks" and (handle is None or handle.discrete):
            kind = "chi_square"
            meta["note"] = "KS against a discrete law replaced by chi-square"
        if kind in ("chi_square", "tv"):
            if target_pmf is None:
                if not handle.discrete:
                    raise InputError(f"{t.kind} needs a discrete target, got {t.target}")
                kmax = int(x.max()) + 1
                target_pmf = np.array([handle.pmf(k) for k in range(kmax + 1)])
            if kind == "tv":
                return tv_distance(target_pmf, b.pmf(t.statistic),
                                   threshold=t.threshold or 0.01, metadata=meta)
            return chi_square_gof(b.tallies(t.statistic), target_pmf,
                                  alpha=t.threshold or 1e-3, metadata=meta)
        if t.kind == "moment":
            mean = t.mean
            if mean is None:
                mean = (float(np.dot(np.arange(target_pmf.size), target_pmf))
                        if target_pmf is not None else handle.mean())
            return moment_z(x, mean, alpha=t.threshold or 1e-3, metadata=meta)
        raise InputError("a KS test at fixed n needs a continuous target; use log_n")
    # log-n scale: M standardized by the limit normalisation, Z as log Z / log n
    if t.statistic == "M":
        nz = limits.normalization(law, t.log_n, "M")
        x = nz.standardize(_jittered(shortcut[("M", t.log_n)], seed))
        meta["normalization"] = {"a": nz.a, "b": nz.b, "case": nz.case}
    elif t.statistic == "Z":
        x = shortcut[("Z", t.log_n)] / t.log_n
    else:
        raise InputError("log_n tests support only M and Z")
    if t.target == "exact":
        raise InputError("no exact law at log-n scale; name a limit distribution")
    handle = limits.parse_dist(t.target)
    if t.kind == "ks":
        return ks_one_sample(x, handle, alpha=t.threshold or 1e-3, metadata=meta)
    if t.kind == "moment":
        mean = t.mean if t.mean is not None else handle.mean()
        return moment_z(x, mean, alpha=t.threshold or 1e-3, metadata=meta)
    raise InputError(f"{t.kind} is not available at log-n scale")


def _write_report(path, reports, fmt):
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "kind", "statistic", "value", "threshold", "passed"])
            for r in reports:
                w.writerow([r.metadata.get("name", r.kind), r.kind, repr(r.statistic),
                            repr(r.value), r.threshold, r.passed])
    else:
        write_jsonl(reports, path)


def cmd_verify(args) -> int:
    if args.suite:
        numbers = None
        if args.criteria:
            try:
                numbers = [int(c) for c in args.criteria.split(",")]
            except ValueError as exc:
                raise InputError("--criteria takes a comma separated list of numbers") from exc
            bad = [c for c in numbers if c not in acceptance.CRITERIA]
            if bad:
                raise InputError(f"unknown criteria {bad}")
        results = acceptance.run_suite(numbers, echo=print)
        passed = sum(r.passed for r in results)
        print(f"{passed}/{len(results)} criteria passed")
        if args.report:
            with open(args.report, "w") as fh:
                for r in results:
                    fh.write(json.dumps(r.to_dict(), default=float) + "\n")
        return EXIT_OK if passed == len(results) else EXIT_FAIL
    try:
        sc = load_scenario(args.scenario)
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc}") from exc
    reports = run_scenario(sc)
    print(summary_table(reports))
    report_path = args.report or sc.outputs.get("report")
    if report_path:
        _write_report(report_path, reports, args.format)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# -- parser -------------------------------------------------------------------

def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sievelab",
                                description="Simulation, exact laws and limit laws of the "
                                            "Bernoulli sieve.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo replicates of K, M, L, Z")
    s.add_argument("--law", required=True, help="e.g. 'beta(1,1)', 'logpareto(1.5,1)'")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, help="number of balls")
    g.add_argument("--t", type=float, help="Poisson(t) number of balls")
    g.add_argument("--log-n", type=float, help="log of the ball count (M and Z only)")
    s.add_argument("--replicates", type=_positive_int, default=1000)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--stat", action="append", choices=sim.STATISTICS,
                   help="statistic to keep; repeatable (default all)")
    s.add_argument("--method", choices=("marks", "coins"), default="marks")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out", help="data file")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("exact", help="exact finite-n distribution tables")
    e.add_argument("--law", required=True)
    e.add_argument("--n-max", type=int, required=True)
    e.add_argument("--stat", choices=("L", "K", "M", "Z"), default="L")
    e.add_argument("--k-max", type=int, help="fixed table width (default: grow until complete)")
    e.add_argument("--out")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.set_defaults(func=cmd_exact)

    lm = sub.add_parser("limits", help="tabulate a reference limit law")
    lm.add_argument("--dist", required=True,
                    help="stable:A | one-stable | ml:A | mixedpoisson:T | zlimit:LAW | "
                         "arcsine:A | normal | geometric[:P]")
    lm.add_argument("--grid", help="lo:hi[:num] (k range for discrete laws); write --grid=-5:5 "
                         "when lo is negative")
    lm.add_argument("--out")
    lm.add_argument("--format", choices=("csv", "json"), default="csv")
    lm.set_defaults(func=cmd_limits)

    v = sub.add_parser("verify", help="run a scenario file or the acceptance suite")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", help="JSON scenario file")
    g.add_argument("--suite", choices=("acceptance",))
    v.add_argument("--criteria", help="subset of the suite, e.g. 1,3,5")
    v.add_argument("--report", help="report file (JSON lines unless --format csv)")
    v.add_argument("--format", choices=("json", "csv"), default="json")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ScenarioError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SieveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
