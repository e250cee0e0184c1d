"""Six benchmark data-generating processes and the Monte Carlo harness.

Each case study draws datasets from a fixed DGP, runs a panel of estimators
(some deliberately misspecified), and reports the mean estimate, empirical
variance, and mean squared error against the known truth.

Randomness is counter-based and fully keyed: variable v of run r in case c
draws from Philox seeded by SeedSequence(seed, spawn_key=(c, r, v)). Adding
a method or skipping an unused variable never perturbs other draws, and
reports are bit-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.special import expit, ndtr, ndtri

from .core import ObservationalDataset, validate, validate_panel
from .errors import (
    CausalestError,
    MissingReferenceCellError,
    TooManyFailedRunsError,
    UnknownCaseError,
)
from .estimators import OrSpec, ate_dr, ate_ipw, ate_or
from .panel import fit_cre, fit_fd, fit_fe, fit_pols, fit_re
from .propensity import PropensityFit, estimate_propensity_binary
from .quasi import DidDataset, ate_2sls, ate_did, rdd_fuzzy, rdd_sharp, validate_did

CASE_IDS = ("cs1", "cs2", "cs3", "cs4", "cs5", "cs6")

TRUE_TAU = {"cs1": -5.0, "cs2": 0.0, "cs3": 0.0, "cs4": -1.0, "cs5": -4.0, "cs6": 5.0}

CASE_METHODS = {
    "cs1": ("OR1", "OR2", "PS1", "PS2", "DR1", "DR2", "DR3"),
    "cs2": ("POLS", "RE", "FD", "FE", "CRE"),
    "cs3": ("POLS", "RE", "FD", "FE", "CRE"),
    "cs4": ("OR1", "OR2", "IV1", "IV2"),
    "cs5": ("DID1", "DID2"),
    "cs6": ("RDD1", "RDD2", "RDD3"),
}

_CASE_VARIANTS = {
    "cs1": (None,),
    "cs2": (None,),
    "cs3": (None,),
    "cs4": (None,),
    "cs5": (None, "violated"),
    "cs6": (None, "sharp", "fuzzy"),
}

_DEFAULT_PARAMS = {
    "cs1": {
        # assignment: P(D=1|x) = expit(alpha0 + alpha1 x); outcome:
        # y = beta0 + tau d + beta1 x + noise
        "alpha0": 2.0,
        "alpha1": 0.5,
        "beta0": 10.0,
        "beta1": 0.5,
        "tau": -5.0,
        "x_variance": 10.0,
        "noise_variance": 5.0,
        # the deliberately wrong score: a truncated normal around the mean
        # true score, independent of x
        "misspecified_score_sd": 0.5,
        "trunc_lo": 0.01,
        "trunc_hi": 0.99,
    },
    "cs2": {
        # unit level w ~ U(w_lo, w_hi); d = delta w + noise(sigma_d);
        # y = alpha + tau d + gamma w + noise(sigma_e); w itself unobserved
        "n_periods": 10,
        "tau": 0.0,
        "alpha": 1.0,
        "delta": 2.0,
        "gamma": 2.0,
        "w_lo": 1.0,
        "w_hi": 100.0,
        "sigma_d": 1.0,
        "sigma_e": 1.0,
    },
    "cs3": {
        # as cs2 but the confounder drifts over time:
        # w_it = w_i + noise(sigma_w) enters both d and y
        "n_periods": 10,
        "tau": 0.0,
        "alpha": 1.0,
        "delta": 2.0,
        "gamma": 2.0,
        "w_lo": 1.0,
        "w_hi": 100.0,
        "sigma_d": 1.0,
        "sigma_e": 1.0,
        "sigma_w": 5.0,
    },
    "cs4": {
        # d = alpha0 + alpha1 x + alpha2 z (+ noise(sigma_d));
        # y = beta0 + tau d + beta1 x + noise(sigma_e); x unobserved by the
        # naive and IV estimators; z_bad = z + bad_coef (x - x_mean)
        "alpha0": 1.0,
        "alpha1": 0.5,
        "alpha2": 1.0,
        "beta0": 1.0,
        "beta1": 0.5,
        "tau": -1.0,
        "x_mean": 15.0,
        "x_sd": 1.0,
        "sigma_d": 0.0,
        "sigma_e": 1.0,
        "bad_coef": 2.0,
    },
    "cs5": {
        # two periods; d1 = ever-treated; y0 = a0 + sel d1 + beta x0 + e;
        # y1 = a1 + sel d1 + tau d1 + beta x0 + e; the violated variant adds
        # violation_coef * x1 to untreated units in period 1
        "tau": -4.0,
        "intercept_pre": 1.0,
        "intercept_post": 3.0,
        "selection_level": 1.0,
        "selection_strength": 1.0,
        "beta_x": 1.0,
        "sigma_e": 1.0,
        "x1_mean": 1.0,
        "x1_sd": 1.0,
        "violation_coef": 1.0,
    },
    "cs6": {
        # forcing t ~ U(t_lo, t_hi); y = intercept + slope t + tau D + noise;
        # fuzzy variant flips treatment for flip_share of units within
        # |t - cutoff| < flip_band
        "tau": 5.0,
        "intercept": 1.0,
        "slope": 2.0,
        "noise_sd": 1.0,
        "cutoff": 0.0,
        "t_lo": -1.0,
        "t_hi": 1.0,
        "flip_share": 0.25,
        "flip_band": 0.25,
    },
}

# stream layout: variable index per case, keyed (seed, case, run, variable)
_VARIABLE_STREAMS = {
    "cs1": {"x": 0, "assignment": 1, "outcome_noise": 2, "misspecified_score": 3},
    "cs2": {"unit_levels": 0, "treatment_noise": 1, "outcome_noise": 2},
    "cs3": {
        "unit_levels": 0,
        "treatment_noise": 1,
        "outcome_noise": 2,
        "measurement_noise": 3,
    },
    "cs4": {"x": 0, "instrument": 1, "treatment_noise": 2, "outcome_noise": 3},
    "cs5": {
        "x0": 0,
        "assignment": 1,
        "noise_pre": 2,
        "noise_post": 3,
        "x1": 4,
    },
    "cs6": {"forcing": 0, "outcome_noise": 1, "compliance": 2},
}


@dataclass(frozen=True)
class DgpSpec:
    """One case study's data-generating configuration.

    Attributes:
        case_id: "cs1" .. "cs6".
        n: sample size per run (for panel cases, total rows at the default
            period count; the unit count is n // n_periods).
        params: overrides of the case's default parameters.
        variant: case-specific flag ("violated" for cs5; "sharp"/"fuzzy"
            for cs6; None selects the case's primary variant).
    """

    case_id: str
    n: int = 1000
    params: dict = field(default_factory=dict)
    variant: str | None = None

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise UnknownCaseError(f"unknown case {self.case_id!r}")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        defaults = _DEFAULT_PARAMS[self.case_id]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameters for {self.case_id}: {sorted(unknown)}")
        if self.variant not in _CASE_VARIANTS[self.case_id]:
            raise ValueError(
                f"unknown variant {self.variant!r} for {self.case_id} "
                f"(allowed: {_CASE_VARIANTS[self.case_id]})"
            )

    @property
    def case_index(self) -> int:
        return int(self.case_id[2])

    def merged_params(self) -> dict:
        merged = dict(_DEFAULT_PARAMS[self.case_id])
        merged.update(self.params)
        return merged


def _stream(seed: int, case_index: int, run_index: int, variable: int):
    return np.random.Generator(
        np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(case_index, run_index, variable))
        )
    )


def _truncated_normal(rng, mu, sigma, lo, hi, size):
    """Exact truncated-normal draws via the inverse-CDF transform."""
    a = ndtr((lo - mu) / sigma)
    b = ndtr((hi - mu) / sigma)
    u = rng.uniform(size=size)
    return mu + sigma * ndtri(a + u * (b - a))


# ---------------------------------------------------------------------------
# Case draws
# ---------------------------------------------------------------------------

def _draw_cs1(spec: DgpSpec, run_index: int, seed: int):
    p = spec.merged_params()
    n = spec.n
    s = _VARIABLE_STREAMS["cs1"]
    x = _stream(seed, 1, run_index, s["x"]).normal(0.0, np.sqrt(p["x_variance"]), n)
    score = expit(p["alpha0"] + p["alpha1"] * x)
    d = (_stream(seed, 1, run_index, s["assignment"]).uniform(size=n) < score).astype(float)
    y = (
        p["beta0"]
        + p["tau"] * d
        + p["beta1"] * x
        + _stream(seed, 1, run_index, s["outcome_noise"]).normal(
            0.0, np.sqrt(p["noise_variance"]), n
        )
    )
    fake = _truncated_normal(
        _stream(seed, 1, run_index, s["misspecified_score"]),
        float(score.mean()),
        p["misspecified_score_sd"],
        p["trunc_lo"],
        p["trunc_hi"],
        n,
    )
    return validate(y, d, x), fake


def _draw_panel(spec: DgpSpec, run_index: int, seed: int):
    p = spec.merged_params()
    case = spec.case_index
    t_per = int(p["n_periods"])
    if t_per < 2:
        raise ValueError("n_periods must be >= 2")
    n_units = spec.n // t_per
    if n_units < 2:
        raise ValueError("n too small for the period count")
    n = n_units * t_per
    s = _VARIABLE_STREAMS[spec.case_id]
    w_unit = _stream(seed, case, run_index, s["unit_levels"]).uniform(
        p["w_lo"], p["w_hi"], n_units
    )
    w = np.repeat(w_unit, t_per)
    if spec.case_id == "cs3":
        w = w + _stream(seed, case, run_index, s["measurement_noise"]).normal(
            0.0, p["sigma_w"], n
        )
    d = p["delta"] * w + _stream(seed, case, run_index, s["treatment_noise"]).normal(
        0.0, p["sigma_d"], n
    )
    y = (
        p["alpha"]
        + p["tau"] * d
        + p["gamma"] * w
        + _stream(seed, case, run_index, s["outcome_noise"]).normal(0.0, p["sigma_e"], n)
    )
    unit = np.repeat(np.arange(n_units), t_per)
    time = np.tile(np.arange(t_per), n_units)
    return validate_panel(unit, time, y, d)


def _draw_cs4(spec: DgpSpec, run_index: int, seed: int):
    p = spec.merged_params()
    n = spec.n
    s = _VARIABLE_STREAMS["cs4"]
    x = _stream(seed, 4, run_index, s["x"]).normal(p["x_mean"], p["x_sd"], n)
    z = _stream(seed, 4, run_index, s["instrument"]).normal(0.0, 1.0, n)
    d = p["alpha0"] + p["alpha1"] * x + p["alpha2"] * z
    if p["sigma_d"] > 0.0:
        d = d + _stream(seed, 4, run_index, s["treatment_noise"]).normal(
            0.0, p["sigma_d"], n
        )
    y = (
        p["beta0"]
        + p["tau"] * d
        + p["beta1"] * x
        + _stream(seed, 4, run_index, s["outcome_noise"]).normal(0.0, p["sigma_e"], n)
    )
    z_bad = z + p["bad_coef"] * (x - p["x_mean"])
    return validate(y, d, x, z=np.column_stack([z, z_bad]))


def _draw_cs5(spec: DgpSpec, run_index: int, seed: int):
    p = spec.merged_params()
    n = spec.n
    s = _VARIABLE_STREAMS["cs5"]
    x0 = _stream(seed, 5, run_index, s["x0"]).normal(0.0, 1.0, n)
    d1 = (
        _stream(seed, 5, run_index, s["assignment"]).uniform(size=n)
        < expit(p["selection_strength"] * x0)
    ).astype(float)
    e0 = _stream(seed, 5, run_index, s["noise_pre"]).normal(0.0, p["sigma_e"], n)
    e1 = _stream(seed, 5, run_index, s["noise_post"]).normal(0.0, p["sigma_e"], n)
    y0 = p["intercept_pre"] + p["selection_level"] * d1 + p["beta_x"] * x0 + e0
    y1 = (
        p["intercept_post"]
        + p["selection_level"] * d1
        + p["tau"] * d1
        + p["beta_x"] * x0
        + e1
    )
    x1 = _stream(seed, 5, run_index, s["x1"]).normal(p["x1_mean"], p["x1_sd"], n)
    y1_violated = y1 + p["violation_coef"] * x1 * (1.0 - d1)

    def long(y_post):
        return validate_did(
            y=np.concatenate([y0, y_post]),
            group=np.concatenate([d1, d1]),
            period=np.concatenate([np.zeros(n), np.ones(n)]),
        )

    return long(y1), long(y1_violated)


def _draw_cs6(spec: DgpSpec, run_index: int, seed: int):
    p = spec.merged_params()
    n = spec.n
    s = _VARIABLE_STREAMS["cs6"]
    t = _stream(seed, 6, run_index, s["forcing"]).uniform(p["t_lo"], p["t_hi"], n)
    eps = _stream(seed, 6, run_index, s["outcome_noise"]).normal(0.0, p["noise_sd"], n)
    d_sharp = (t >= p["cutoff"]).astype(float)
    flip = (
        _stream(seed, 6, run_index, s["compliance"]).uniform(size=n) < p["flip_share"]
    ) & (np.abs(t - p["cutoff"]) < p["flip_band"])
    d_fuzzy = np.where(flip, 1.0 - d_sharp, d_sharp)
    y_sharp = p["intercept"] + p["slope"] * t + p["tau"] * d_sharp + eps
    y_fuzzy = p["intercept"] + p["slope"] * t + p["tau"] * d_fuzzy + eps
    return validate(y_sharp, d_sharp, t), validate(y_fuzzy, d_fuzzy, t)


def generate(spec: DgpSpec, run_index: int, seed: int = 42):
    """Draw the dataset for one Monte Carlo run of a case study.

    Returns an ObservationalDataset (cs1, cs4, cs6), a PanelDataset
    (cs2, cs3), or a DidDataset (cs5); cs5/cs6 variants select the violated
    or sharp/fuzzy arm of the design.
    """
    if run_index < 0:
        raise ValueError("run_index must be >= 0")
    if spec.case_id == "cs1":
        return _draw_cs1(spec, run_index, seed)[0]
    if spec.case_id in ("cs2", "cs3"):
        return _draw_panel(spec, run_index, seed)
    if spec.case_id == "cs4":
        return _draw_cs4(spec, run_index, seed)
    if spec.case_id == "cs5":
        base, violated = _draw_cs5(spec, run_index, seed)
        return violated if spec.variant == "violated" else base
    sharp, fuzzy = _draw_cs6(spec, run_index, seed)
    return fuzzy if spec.variant == "fuzzy" else sharp


def misspecified_scores(spec: DgpSpec, run_index: int, seed: int = 42) -> np.ndarray:
    """The deliberately wrong assignment scores paired with a cs1 draw."""
    if spec.case_id != "cs1":
        raise UnknownCaseError("misspecified scores are defined for cs1 only")
    return _draw_cs1(spec, run_index, seed)[1]


# ---------------------------------------------------------------------------
# Per-case method panels
# ---------------------------------------------------------------------------

def _run_cs1(spec, run_index, seed):
    ds, fake = _draw_cs1(spec, run_index, seed)
    no_x = OrSpec(covariate_selection=())
    fitted = estimate_propensity_binary(ds)
    injected = PropensityFit.from_scores(fake, ds.d)
    return {
        "OR1": ate_or(ds).point,
        "OR2": ate_or(ds, spec=no_x).point,
        "PS1": ate_ipw(ds, fitted).point,
        "PS2": ate_ipw(ds, injected).point,
        "DR1": ate_dr(ds, fitted, spec=no_x).point,
        "DR2": ate_dr(ds, injected).point,
        "DR3": ate_dr(ds, injected, spec=no_x).point,
    }


def _run_panel(spec, run_index, seed):
    pds = _draw_panel(spec, run_index, seed)
    return {
        "POLS": fit_pols(pds).point,
        "RE": fit_re(pds).point,
        "FD": fit_fd(pds).point,
        "FE": fit_fe(pds).point,
        "CRE": fit_cre(pds).point,
    }


def _run_cs4(spec, run_index, seed):
    ds = _draw_cs4(spec, run_index, seed)
    return {
        "OR1": ate_or(ds).point,
        "OR2": ate_or(ds, spec=OrSpec(covariate_selection=())).point,
        "IV1": ate_2sls(ds.y, ds.d, ds.z[:, 0]).point,
        "IV2": ate_2sls(ds.y, ds.d, ds.z[:, 1]).point,
    }


def _run_cs5(spec, run_index, seed):
    base, violated = _draw_cs5(spec, run_index, seed)
    return {"DID1": ate_did(base).point, "DID2": ate_did(violated).point}


def _run_cs6(spec, run_index, seed):
    p = spec.merged_params()
    sharp, fuzzy = _draw_cs6(spec, run_index, seed)
    t_sharp = sharp.x[:, 0]
    t_fuzzy = fuzzy.x[:, 0]
    return {
        "RDD1": rdd_sharp(sharp.y, t_sharp, cutoff=p["cutoff"]).point,
        "RDD2": rdd_sharp(fuzzy.y, t_fuzzy, cutoff=p["cutoff"]).point,
        "RDD3": rdd_fuzzy(fuzzy.y, t_fuzzy, fuzzy.d, cutoff=p["cutoff"]).point,
    }


_RUNNERS = {
    "cs1": _run_cs1,
    "cs2": _run_panel,
    "cs3": _run_panel,
    "cs4": _run_cs4,
    "cs5": _run_cs5,
    "cs6": _run_cs6,
}

_MAX_FAILED_SHARE = 0.05


@dataclass
class MonteCarloReport:
    """Aggregated Monte Carlo results for one case study.

    Attributes:
        case_id: the case that ran.
        methods: method labels in report order.
        runs, n, seed: experiment dimensions.
        true_tau: the effect the DGP embeds.
        av_est: mean estimate per method over successful runs.
        emp_var: empirical variance (divisor R-1) per method.
        mse: emp_var + squared bias per method (so MSE = var + bias^2 holds
            exactly).
        points: per-run estimates, shape (runs, len(methods)); NaN marks a
            failed run.
        n_failed: failed-run count per method.
        metadata: parameters and notation-reading records for meta.json.
    """

    case_id: str
    methods: tuple
    runs: int
    n: int
    seed: int
    true_tau: float
    av_est: np.ndarray
    emp_var: np.ndarray
    mse: np.ndarray
    points: np.ndarray
    n_failed: np.ndarray
    metadata: dict


_NOTATION_READINGS = {
    "cs1": {
        "x_scale": "second argument of the normal law read as a variance",
        "outcome_noise_scale": "second argument read as a variance",
        "misspecified_score_scale": "second argument read as a standard deviation",
        "misspecified_score_support": "truncated to [trunc_lo, trunc_hi] by inverse-CDF sampling",
        "calibration": "x-variance reading selected by matching the covariate-omitted regression bias",
    },
    "cs2": {
        "unstated_parameters": "sigma_d=1 and sigma_e=1 chosen so the pooled and random-effects biases exceed 0.5",
        "sign": "the stated positive design parameters imply positive pooled/random-effects bias; the shipped reference table records the magnitudes with the opposite sign, so checks on this case are property-based",
    },
    "cs3": {
        "unstated_parameters": "sigma_w=5 drift noise; true effect kept at 0 per the shared design",
        "sign": "as in cs2, checks are property-based: the stated design fixes the bias magnitudes and the reference table is descriptive only",
    },
    "cs4": {
        "sigma_d": "0 (treatment deterministic given x and z), the value consistent with the documented naive bias of 0.2",
        "bad_instrument": "z_bad = z + bad_coef (x - x_mean) with bad_coef=2 so its bias exceeds the naive regression's",
    },
    "cs5": {
        "violation": "x1 ~ N(x1_mean, x1_sd^2) added to untreated units in the post period",
    },
    "cs6": {
        "fuzziness": "flip_share of units within flip_band of the cutoff receive the opposite treatment",
    },
}


def run_monte_carlo(
    case_id: str,
    methods=None,
    runs: int = 1000,
    n: int = 1000,
    seed: int = 42,
    jobs: int = 1,
    params: dict | None = None,
) -> MonteCarloReport:
    """Run one case study's Monte Carlo experiment.

    Per-run estimator failures are recorded as NaN; if any method fails on
    more than 5% of runs the experiment aborts. Results are deterministic
    for a fixed seed regardless of `jobs`.
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    spec = DgpSpec(case_id=case_id, n=n, params=params or {})
    available = CASE_METHODS[case_id]
    if methods is None:
        methods = available
    else:
        methods = tuple(methods)
        unknown = set(methods) - set(available)
        if unknown:
            raise ValueError(f"unknown methods for {case_id}: {sorted(unknown)}")
    runner = _RUNNERS[case_id]

    def one(r: int) -> np.ndarray:
        try:
            values = runner(spec, r, seed)
        except CausalestError:
            return np.full(len(methods), np.nan)
        return np.array([values[m] for m in methods])

    points = np.empty((runs, len(methods)))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for r, row in enumerate(pool.map(one, range(runs))):
                points[r] = row
    else:
        for r in range(runs):
            points[r] = one(r)

    n_failed = np.array([int(np.isnan(points[:, j]).sum()) for j in range(len(methods))])
    for j, m in enumerate(methods):
        if n_failed[j] > _MAX_FAILED_SHARE * runs:
            raise TooManyFailedRunsError(
                f"{m} failed on {n_failed[j]}/{runs} runs "
                f"(tolerance {_MAX_FAILED_SHARE:.0%})"
            )
    tau = TRUE_TAU[case_id]
    av = np.empty(len(methods))
    var = np.empty(len(methods))
    for j in range(len(methods)):
        ok = points[:, j][np.isfinite(points[:, j])]
        av[j] = ok.mean()
        var[j] = ok.var(ddof=1)
    mse = var + (av - tau) ** 2
    return MonteCarloReport(
        case_id=case_id,
        methods=methods,
        runs=runs,
        n=n,
        seed=seed,
        true_tau=tau,
        av_est=av,
        emp_var=var,
        mse=mse,
        points=points,
        n_failed=n_failed,
        metadata={
            "params": spec.merged_params(),
            "notation_readings": _NOTATION_READINGS[case_id],
        },
    )


# ---------------------------------------------------------------------------
# Golden-file comparison
# ---------------------------------------------------------------------------

_REPORT_FIELDS = ("av_est", "emp_var", "mse")
_CONSISTENCY_TOL = 1e-9


@dataclass
class CellCheck:
    """One golden-comparison verdict."""

    method: str
    quantity: str
    produced: float
    expected: float | None
    tol: float | None
    passed: bool


def _tolerance_band(tol, expected: float) -> float:
    """Absolute band width from a tolerance entry.

    A bare number is an absolute tolerance; a mapping may give "abs" and/or
    "rel" (relative to |expected|), the wider of which applies.
    """
    if isinstance(tol, dict):
        unknown = set(tol) - {"abs", "rel"}
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        if not tol:
            raise ValueError("empty tolerance entry")
        return max(
            float(tol.get("abs", 0.0)), float(tol.get("rel", 0.0)) * abs(expected)
        )
    return float(tol)


def compare_to_reference(
    report: MonteCarloReport, reference: dict, tolerances: dict
) -> list[CellCheck]:
    """Check report cells against a reference table within given tolerances.

    `reference` maps method -> {av_est, emp_var, mse}; `tolerances` maps
    method -> {quantity: absolute tolerance}. Every report method must
    appear in the reference. Each report row also gets an internal
    consistency check that MSE equals variance plus squared bias.
    """
    checks: list[CellCheck] = []
    for j, m in enumerate(report.methods):
        if m not in reference:
            raise MissingReferenceCellError(f"reference table has no row for {m}")
        produced = {
            "av_est": float(report.av_est[j]),
            "emp_var": float(report.emp_var[j]),
            "mse": float(report.mse[j]),
        }
        for quantity, tol in tolerances.get(m, {}).items():
            if quantity not in _REPORT_FIELDS:
                raise ValueError(f"unknown report quantity {quantity!r}")
            expected = reference[m][quantity]
            band = _tolerance_band(tol, expected)
            checks.append(
                CellCheck(
                    method=m,
                    quantity=quantity,
                    produced=produced[quantity],
                    expected=expected,
                    tol=band,
                    passed=abs(produced[quantity] - expected) <= band,
                )
            )
        recomputed = produced["emp_var"] + (produced["av_est"] - report.true_tau) ** 2
        checks.append(
            CellCheck(
                method=m,
                quantity="mse_consistency",
                produced=produced["mse"],
                expected=recomputed,
                tol=_CONSISTENCY_TOL,
                passed=abs(produced["mse"] - recomputed) <= _CONSISTENCY_TOL,
            )
        )
    return checks


def read_reference_csv(text: str) -> dict:
    """Parse a reference table (columns method, av_est, emp_var, mse)."""
    rows = {}
    reader = csv.DictReader(io.StringIO(text))
    required = {"method", *_REPORT_FIELDS}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise ValueError("reference table must have columns method, av_est, emp_var, mse")
    for row in reader:
        rows[row["method"]] = {f: float(row[f]) for f in _REPORT_FIELDS}
    if not rows:
        raise ValueError("reference table is empty")
    return rows


def load_reference(case_id: str) -> dict:
    """The packaged reference table for a case."""
    if case_id not in CASE_IDS:
        raise UnknownCaseError(f"unknown case {case_id!r}")
    text = (resources.files("causalest") / "reference" / f"{case_id}.csv").read_text()
    return read_reference_csv(text)


def load_tolerances(case_id: str) -> dict | None:
    """The packaged tolerance map for a case, or None when no cell-exact
    tolerances are defined (cases whose acceptance is property-based)."""
    if case_id not in CASE_IDS:
        raise UnknownCaseError(f"unknown case {case_id!r}")
    ref = resources.files("causalest") / "reference" / f"{case_id}_tol.json"
    if not ref.is_file():
        return None
    return json.loads(ref.read_text())
