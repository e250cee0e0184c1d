"""Command-line interface.

Two subcommands:

* ``causalest estimate`` — run one estimator on a user-supplied CSV and
  print a JSON report.
* ``causalest simulate`` — run the benchmark Monte Carlo case studies and
  write report.csv / runs.csv / meta.json, optionally checking the report
  against a reference table.

Exit codes: 0 success, 1 reference check failed, 2 input error,
3 estimation error. All randomness flows from ``--seed`` (default 42);
wall-clock time is never consulted.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import difference_in_means, validate
from .errors import CausalestError, MissingReferenceCellError
from .estimators import (
    OrSpec,
    ate_dr,
    ate_ipw,
    ate_matching,
    ate_or,
    ate_psr,
    ate_stratification,
)
from .propensity import estimate_propensity_binary, trim_overlap
from .simulate import (
    CASE_IDS,
    compare_to_reference,
    load_reference,
    load_tolerances,
    read_reference_csv,
    run_monte_carlo,
)
from .variance import bootstrap_variance

_PS_METHODS = ("ipw", "psr", "strat", "match", "dr")
_ESTIMATE_METHODS = ("dim", "or") + _PS_METHODS


class _InputError(Exception):
    """User input problem (bad file, column, or option value) -> exit 2."""


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _read_columns(path: str, names: list[str]) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames or []
            for name in names:
                if name not in header:
                    raise _InputError(f"unknown column {name!r} in {path}")
            rows = list(reader)
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise _InputError(f"{path} has no data rows")
    out = {}
    for name in names:
        try:
            out[name] = np.array([float(row[name]) for row in rows])
        except (TypeError, ValueError) as exc:
            raise _InputError(f"column {name!r} has a non-numeric value") from exc
    return out


def _parse_trim(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise _InputError("--trim expects 'lo,hi'")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise _InputError("--trim expects numeric bounds") from exc
    if not (0.0 <= lo < hi <= 1.0):
        raise _InputError("--trim bounds must satisfy 0 <= lo < hi <= 1")
    return lo, hi


def _estimate_once(ds, method: str, trim: tuple[float, float]):
    if method == "dim":
        return difference_in_means(ds)
    if method == "or":
        return ate_or(ds)
    fit = estimate_propensity_binary(ds)
    fit, kept = trim_overlap(fit, *trim)
    sub = ds.take(kept)
    if method == "ipw":
        return ate_ipw(sub, fit)
    if method == "psr":
        return ate_psr(sub, fit)
    if method == "strat":
        return ate_stratification(sub, fit)
    if method == "match":
        return ate_matching(sub, fit)
    return ate_dr(sub, fit)


def _cmd_estimate(args) -> int:
    covariates = [c for c in (args.covariates or "").split(",") if c]
    trim = _parse_trim(args.trim)
    names = [args.outcome, args.treatment, *covariates]
    columns = _read_columns(args.data, names)
    x = (
        np.column_stack([columns[c] for c in covariates])
        if covariates
        else None
    )
    try:
        ds = validate(columns[args.outcome], columns[args.treatment], x)
    except CausalestError as exc:
        raise _InputError(str(exc)) from exc
    except ValueError as exc:
        raise _InputError(str(exc)) from exc

    try:
        est = _estimate_once(ds, args.method, trim)
        if args.bootstrap:
            boot = bootstrap_variance(
                ds,
                lambda sample: _estimate_once(sample, args.method, trim),
                n_boot=args.bootstrap,
                seed=args.seed,
            )
            est = est.with_uncertainty(boot.variance, boot.ci)
    except CausalestError as exc:
        return _fail(3, str(exc))

    report = {
        "method": est.method,
        "estimand": est.estimand,
        "point": est.point,
        "variance": est.variance,
        "ci": list(est.ci) if est.ci is not None else None,
        "n_used": est.n_used,
        "seed": args.seed,
        "diagnostics": _jsonable(est.diagnostics),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _format_cell(value: float) -> str:
    return repr(float(value))


def _write_case_outputs(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.csv", "w", newline="") as handle:
        handle.write("method,av_est,emp_var,mse\n")
        for j, m in enumerate(report.methods):
            handle.write(
                f"{m},{_format_cell(report.av_est[j])},"
                f"{_format_cell(report.emp_var[j])},{_format_cell(report.mse[j])}\n"
            )
    with open(out_dir / "runs.csv", "w", newline="") as handle:
        handle.write("run," + ",".join(report.methods) + "\n")
        for r in range(report.runs):
            cells = ",".join(_format_cell(v) for v in report.points[r])
            handle.write(f"{r},{cells}\n")
    meta = {
        "case": report.case_id,
        "methods": list(report.methods),
        "runs": report.runs,
        "n": report.n,
        "seed": report.seed,
        "true_tau": report.true_tau,
        "n_failed": report.n_failed.tolist(),
        "metadata": _jsonable(report.metadata),
    }
    with open(out_dir / "meta.json", "w") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _check_case(report, check: str | None, tol_path: str | None) -> bool:
    """Run the golden comparison; returns True when every cell passes."""
    if check == "builtin":
        reference = load_reference(report.case_id)
    else:
        try:
            reference = read_reference_csv(Path(check).read_text())
        except OSError as exc:
            raise _InputError(f"cannot read {check}: {exc}") from exc
    if tol_path is not None:
        try:
            tolerances = json.loads(Path(tol_path).read_text())
        except OSError as exc:
            raise _InputError(f"cannot read {tol_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _InputError(f"{tol_path} is not valid JSON: {exc}") from exc
    else:
        tolerances = load_tolerances(report.case_id) or {}
    try:
        checks = compare_to_reference(report, reference, tolerances)
    except (MissingReferenceCellError, ValueError) as exc:
        raise _InputError(str(exc)) from exc
    ok = True
    for c in checks:
        status = "ok" if c.passed else "FAIL"
        print(
            f"[{status}] {report.case_id} {c.method} {c.quantity}: "
            f"{c.produced:.6g} vs {c.expected:.6g} (tol {c.tol:g})"
        )
        ok = ok and c.passed
    return ok


def _cmd_simulate(args) -> int:
    cases = list(CASE_IDS) if args.case == "all" else [args.case]
    out_root = Path(args.out)
    all_ok = True
    for case in cases:
        try:
            report = run_monte_carlo(
                case, runs=args.runs, n=args.n, seed=args.seed, jobs=args.jobs
            )
        except CausalestError as exc:
            return _fail(3, f"{case}: {exc}")
        target = out_root / case if len(cases) > 1 else out_root
        _write_case_outputs(report, target)
        for j, m in enumerate(report.methods):
            print(
                f"{case} {m}: av_est={report.av_est[j]:.4f} "
                f"emp_var={report.emp_var[j]:.4f} mse={report.mse[j]:.4f}"
            )
        if args.check is not None:
            all_ok = _check_case(report, args.check, args.tol_file) and all_ok
    if not all_ok:
        print("reference check failed", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalest",
        description="Causal effect estimation and simulation benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a treatment effect from a CSV")
    est.add_argument("--method", required=True, choices=_ESTIMATE_METHODS)
    est.add_argument("--data", required=True, help="input CSV path")
    est.add_argument("--outcome", required=True, help="outcome column name")
    est.add_argument("--treatment", required=True, help="treatment column name")
    est.add_argument(
        "--covariates", default="", help="comma-separated covariate column names"
    )
    est.add_argument(
        "--bootstrap",
        type=int,
        default=0,
        metavar="B",
        help="bootstrap replicates for variance/CI (0 = analytic only)",
    )
    est.add_argument(
        "--trim",
        default="0.01,0.99",
        help="score trimming bounds lo,hi for score-based methods",
    )
    est.add_argument("--seed", type=int, default=42)
    est.set_defaults(run=_cmd_estimate)

    sim = sub.add_parser("simulate", help="run a benchmark case study")
    sim.add_argument("--case", required=True, choices=CASE_IDS + ("all",))
    sim.add_argument("--runs", type=int, default=1000)
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=42)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument(
        "--check",
        nargs="?",
        const="builtin",
        default=None,
        metavar="PATH",
        help="compare the report against a reference table "
        "(built-in when no path is given)",
    )
    sim.add_argument(
        "--tol-file", default=None, help="JSON tolerance map for --check"
    )
    sim.set_defaults(run=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except _InputError as exc:
        return _fail(2, str(exc))
    except ValueError as exc:
        return _fail(2, str(exc))
    except CausalestError as exc:
        return _fail(3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
