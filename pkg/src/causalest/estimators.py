"""Cross-sectional treatment-effect estimators.

Covers outcome regression, inverse-probability weighting, propensity-score
regression, stratification, nearest-neighbour matching on the score, and the
augmented (doubly robust) combination of outcome and assignment models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BINARY, CausalEstimate, ObservationalDataset
from .errors import (
    EmptyDoseGroupError,
    InsufficientMatchesError,
    NoUsableStratumError,
    ZeroPropensityError,
)
from .propensity import PropensityFit, quantile_strata
from .regress import IDENTITY, LOGIT, LinearFit, fit_logistic, fit_ols, predict
from .variance import delta_variance, normal_interval

_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class OrSpec:
    """Outcome-regression specification.

    Attributes:
        link: "identity" (linear model) or "logit" (binary outcomes).
        interactions_with_d: also include treatment-by-covariate products,
            letting covariate slopes differ by treatment level.
        covariate_selection: indices of x columns to include (None = all;
            an empty tuple fits the treatment-only model).
    """

    link: str = IDENTITY
    interactions_with_d: bool = False
    covariate_selection: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.link not in (IDENTITY, LOGIT):
            raise ValueError(f"unknown link {self.link!r}")

    def select(self, x: np.ndarray) -> np.ndarray:
        if self.covariate_selection is None:
            return x
        sel = tuple(self.covariate_selection)
        for j in sel:
            if not (0 <= j < x.shape[1]):
                raise ValueError(f"covariate column {j} does not exist (p={x.shape[1]})")
        return x[:, sel]


def _or_design(d: np.ndarray, x: np.ndarray, spec: OrSpec) -> np.ndarray:
    xs = spec.select(x)
    cols = [np.ones(d.shape[0]), d]
    if xs.shape[1]:
        cols.append(xs)
        if spec.interactions_with_d:
            cols.append(d[:, None] * xs)
    return np.column_stack(cols)


def fit_outcome_model(ds: ObservationalDataset, spec: OrSpec | None = None) -> LinearFit:
    """Pooled regression of y on (1, d, x[, d*x]) with the requested link."""
    spec = spec or OrSpec()
    design = _or_design(ds.d, ds.x, spec)
    if spec.link == LOGIT:
        return fit_logistic(design, ds.y)
    return fit_ols(design, ds.y)


def _apo_prediction(ds, fit, spec, dose):
    """Mean predicted outcome with everyone's dose set to `dose`, plus the
    delta-method gradient of that mean in the coefficients."""
    design_at = _or_design(np.full(ds.n, float(dose)), ds.x, spec)
    preds = predict(fit, design_at)
    if fit.link == LOGIT:
        grad = ((preds * (1.0 - preds))[:, None] * design_at).mean(axis=0)
    else:
        grad = design_at.mean(axis=0)
    return float(preds.mean()), grad


def apo_or(
    ds: ObservationalDataset, dose: float, spec: OrSpec | None = None
) -> CausalEstimate:
    """Average potential outcome at `dose` from the pooled outcome regression."""
    spec = spec or OrSpec()
    fit = fit_outcome_model(ds, spec)
    point, grad = _apo_prediction(ds, fit, spec, dose)
    var = delta_variance(fit, grad)
    return CausalEstimate(
        estimand="APO",
        method="or",
        dose=float(dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={"link": spec.link, "interactions": spec.interactions_with_d},
    )


def ate_or(
    ds: ObservationalDataset,
    dose: float = 1.0,
    ref_dose: float = 0.0,
    spec: OrSpec | None = None,
) -> CausalEstimate:
    """Average effect of `dose` vs `ref_dose` from the pooled outcome regression."""
    spec = spec or OrSpec()
    fit = fit_outcome_model(ds, spec)
    hi, g_hi = _apo_prediction(ds, fit, spec, dose)
    lo, g_lo = _apo_prediction(ds, fit, spec, ref_dose)
    point = hi - lo
    var = delta_variance(fit, g_hi - g_lo)
    return CausalEstimate(
        estimand="ATE",
        method="or",
        dose=float(dose),
        ref_dose=float(ref_dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={"link": spec.link, "interactions": spec.interactions_with_d},
    )


def _dose_weights(ds, fit, dose):
    """Indicator of receiving `dose` and the per-unit P(D=dose|x) scores,
    guarding the weight floor only where the indicator is on."""
    ind = (ds.d == float(dose)).astype(float)
    if ind.sum() == 0:
        raise EmptyDoseGroupError(f"no unit received dose {dose}")
    p = fit.score_at(dose)
    if np.any(p[ind == 1.0] < _WEIGHT_FLOOR):
        raise ZeroPropensityError(
            f"a unit at dose {dose} has an assignment score below {_WEIGHT_FLOOR}"
        )
    return ind, p


def apo_ipw(
    ds: ObservationalDataset, fit: PropensityFit, dose: float
) -> CausalEstimate:
    """Horvitz-Thompson average potential outcome: mean of 1[D=d] y / score."""
    ind, p = _dose_weights(ds, fit, dose)
    contrib = ind * ds.y / p
    point = float(contrib.mean())
    var = float(contrib.var(ddof=1) / ds.n)
    return CausalEstimate(
        estimand="APO",
        method="ipw",
        dose=float(dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={"n_at_dose": int(ind.sum())},
    )


def ate_ipw(
    ds: ObservationalDataset,
    fit: PropensityFit,
    dose: float = 1.0,
    ref_dose: float = 0.0,
) -> CausalEstimate:
    """Difference of Horvitz-Thompson weighted means at `dose` vs `ref_dose`."""
    ind1, p1 = _dose_weights(ds, fit, dose)
    ind0, p0 = _dose_weights(ds, fit, ref_dose)
    contrib = ind1 * ds.y / p1 - ind0 * ds.y / p0
    point = float(contrib.mean())
    var = float(contrib.var(ddof=1) / ds.n)
    return CausalEstimate(
        estimand="ATE",
        method="ipw",
        dose=float(dose),
        ref_dose=float(ref_dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={"n_at_dose": int(ind1.sum()), "n_at_ref": int(ind0.sum())},
    )


def ate_psr(
    ds: ObservationalDataset,
    fit: PropensityFit,
    dose: float = 1.0,
    ref_dose: float = 0.0,
    poly_degree: int = 1,
    interactions: bool = False,
) -> CausalEstimate:
    """Regression of y on treatment and a polynomial in the treated-probability.

    The additive form (default) reads the effect off the treatment
    coefficient. With `interactions=True`, treatment-by-score products are
    added and the averaged predicted contrast at `dose` vs `ref_dose` is
    returned (the treatment coefficient plus the interaction coefficients
    evaluated at the mean score powers).
    """
    if ds.treatment_kind != BINARY:
        raise ValueError("propensity-score regression requires a binary treatment")
    if poly_degree < 1:
        raise ValueError("poly_degree must be >= 1")
    p1 = fit.scores_treated
    degenerate = bool(np.ptp(p1) == 0.0)
    powers = [] if degenerate else [p1**k for k in range(1, poly_degree + 1)]
    cols = [np.ones(ds.n), ds.d, *powers]
    if interactions and not degenerate:
        cols.extend(ds.d * pk for pk in powers)
    design = np.column_stack(cols)
    ols = fit_ols(design, ds.y)
    grad = np.zeros(design.shape[1])
    grad[1] = float(dose) - float(ref_dose)
    if interactions and not degenerate:
        for k in range(1, poly_degree + 1):
            grad[1 + poly_degree + k] = grad[1] * float((p1**k).mean())
    point = float(grad @ ols.coef)
    var = delta_variance(ols, grad)
    return CausalEstimate(
        estimand="ATE",
        method="psr",
        dose=float(dose),
        ref_dose=float(ref_dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={
            "poly_degree": poly_degree,
            "interactions": interactions,
            "degenerate_score": degenerate,
        },
    )


def ate_stratification(
    ds: ObservationalDataset, fit: PropensityFit, n_strata: int = 5
) -> CausalEstimate:
    """Size-weighted within-stratum mean differences over score strata.

    Strata lacking one arm are dropped and the weights renormalized over the
    remaining strata; the excluded unit count is reported as a diagnostic.
    """
    if ds.treatment_kind != BINARY:
        raise ValueError("stratification requires a binary treatment")
    labels = quantile_strata(fit.scores_treated, n_strata)
    treated = ds.d == 1.0
    diffs, sizes, var_terms = [], [], []
    n_unusable = 0
    for j in range(n_strata):
        in_j = labels == j
        y1 = ds.y[in_j & treated]
        y0 = ds.y[in_j & ~treated]
        if y1.size == 0 or y0.size == 0:
            n_unusable += 1
            continue
        diffs.append(y1.mean() - y0.mean())
        sizes.append(int(in_j.sum()))
        if y1.size > 1 and y0.size > 1:
            var_terms.append(y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size)
        else:
            var_terms.append(None)
    if not sizes:
        raise NoUsableStratumError("no stratum contains both treatment arms")
    w = np.asarray(sizes, dtype=float)
    w /= w.sum()
    point = float(w @ np.asarray(diffs))
    var = None
    ci = None
    if all(v is not None for v in var_terms):
        var = float(np.sum(w**2 * np.asarray(var_terms, dtype=float)))
        ci = normal_interval(point, var)
    return CausalEstimate(
        estimand="ATE",
        method="stratification",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        ci=ci,
        n_used=int(sum(sizes)),
        diagnostics={
            "n_strata": n_strata,
            "n_unusable_strata": n_unusable,
            "n_excluded_units": int(ds.n - sum(sizes)),
        },
    )


def ate_matching(
    ds: ObservationalDataset, fit: PropensityFit, n_matches: int = 1
) -> CausalEstimate:
    """Nearest-neighbour matching (with replacement) on the treated-probability.

    Each unit's counterfactual outcome is the mean outcome of its `n_matches`
    closest opposite-arm units by absolute score distance; distance ties go
    to the lowest-index candidate. No analytic variance is reported — use the
    bootstrap.
    """
    if ds.treatment_kind != BINARY:
        raise ValueError("matching requires a binary treatment")
    if n_matches < 1:
        raise ValueError("n_matches must be >= 1")
    p1 = fit.scores_treated
    treated = ds.d == 1.0
    idx_t = np.flatnonzero(treated)
    idx_c = np.flatnonzero(~treated)
    if min(idx_t.size, idx_c.size) < n_matches:
        raise InsufficientMatchesError(
            f"need {n_matches} matches but arms have sizes "
            f"({idx_t.size}, {idx_c.size})"
        )

    def imputed_from(targets, pool):
        # candidates are in ascending index order, so a stable sort resolves
        # distance ties toward the lowest index
        dist = np.abs(p1[targets][:, None] - p1[pool][None, :])
        order = np.argsort(dist, axis=1, kind="stable")[:, :n_matches]
        return ds.y[pool][order].mean(axis=1)

    effect_t = ds.y[idx_t] - imputed_from(idx_t, idx_c)
    effect_c = imputed_from(idx_c, idx_t) - ds.y[idx_c]
    point = float((effect_t.sum() + effect_c.sum()) / ds.n)
    return CausalEstimate(
        estimand="ATE",
        method="matching",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        n_used=ds.n,
        diagnostics={"n_matches": n_matches},
    )


def ate_dr(
    ds: ObservationalDataset,
    fit: PropensityFit,
    dose: float = 1.0,
    ref_dose: float = 0.0,
    spec: OrSpec | None = None,
) -> CausalEstimate:
    """Augmented (doubly robust) estimator combining both nuisance models.

    Consistent if either the outcome regression or the assignment model is
    correctly specified.
    """
    spec = spec or OrSpec()
    or_fit = fit_outcome_model(ds, spec)

    def arm(d_val):
        ind, p = _dose_weights(ds, fit, d_val)
        m = predict(or_fit, _or_design(np.full(ds.n, float(d_val)), ds.x, spec))
        return m + ind * (ds.y - m) / p, ind

    hi, ind1 = arm(dose)
    lo, ind0 = arm(ref_dose)
    contrib = hi - lo
    point = float(contrib.mean())
    var = float(contrib.var(ddof=1) / ds.n)
    return CausalEstimate(
        estimand="ATE",
        method="dr",
        dose=float(dose),
        ref_dose=float(ref_dose),
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=ds.n,
        diagnostics={
            "link": spec.link,
            "interactions": spec.interactions_with_d,
            "n_at_dose": int(ind1.sum()),
            "n_at_ref": int(ind0.sum()),
        },
    )
