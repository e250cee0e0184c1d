"""Assignment models: binary/multivalued propensity scores and a normal GPS.

Also provides overlap trimming and the stratified balance diagnostic that
verifies the balancing property of the estimated score.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import BINARY, CONTINUOUS, MULTIVALUED, ObservationalDataset
from .errors import (
    AllUnitsTrimmedError,
    NoTreatmentVariationError,
    SigmaFloorError,
)
from .regress import LinearFit, fit_logistic, fit_ols, predict

BINARY_LOGISTIC = "binary_logistic"
MULTIVALUED_LOGISTIC = "multivalued_logistic"
GPS_NORMAL = "gps_normal"

_SIGMA_FLOOR = 1e-12


@dataclass
class PropensityFit:
    """A fitted assignment model with per-unit scores.

    Attributes:
        kind: "binary_logistic", "multivalued_logistic" or "gps_normal".
        scores: score of the *received* treatment per unit — a probability
            for binary/multivalued, a conditional density for continuous.
        model: the underlying regression fit (None for injected scores).
        sigma: residual scale (gps_normal only).
        trim_bounds: (lo, hi) applied by trim_overlap, if any.
        level_scores: level -> P(D=level | x) vectors (binary/multivalued).
        diagnostics: extras such as the dropped-unit count after trimming.
    """

    kind: str
    scores: np.ndarray
    model: LinearFit | None = None
    sigma: float | None = None
    trim_bounds: tuple[float, float] | None = None
    level_scores: dict[float, np.ndarray] | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if self.kind in (BINARY_LOGISTIC, MULTIVALUED_LOGISTIC):
            if np.any(s <= 0.0) or np.any(s >= 1.0):
                raise ValueError(f"{self.kind} scores must lie strictly in (0, 1)")
        elif np.any(s <= 0.0):
            raise ValueError("density scores must be positive")

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    def score_at(self, d: float) -> np.ndarray:
        """P(D = d | x) for every unit (binary/multivalued fits only)."""
        if self.level_scores is None:
            raise ValueError("per-dose scores are undefined for a density fit")
        key = float(d)
        if key not in self.level_scores:
            raise ValueError(f"no score model for level {d}")
        return self.level_scores[key]

    @property
    def scores_treated(self) -> np.ndarray:
        """For binary fits: P(D=1 | x) per unit."""
        if self.kind != BINARY_LOGISTIC or self.level_scores is None:
            raise ValueError("scores_treated is defined for binary fits only")
        return self.level_scores[1.0]

    @classmethod
    def from_scores(cls, p1, d) -> "PropensityFit":
        """Wrap externally supplied treated-probabilities as a binary fit.

        `p1` is P(D=1 | x) per unit and `d` the observed 0/1 treatment, so
        the received-dose scores can be formed.
        """
        p = np.asarray(p1, dtype=float)
        dv = np.asarray(d, dtype=float)
        if p.shape != dv.shape:
            raise ValueError("p1 and d must have the same length")
        return cls(
            kind=BINARY_LOGISTIC,
            scores=np.where(dv == 1.0, p, 1.0 - p),
            level_scores={1.0: p, 0.0: 1.0 - p},
        )


def estimate_propensity_binary(ds: ObservationalDataset) -> PropensityFit:
    """Logistic fit of d on (1, x); scores are fitted received-dose probabilities."""
    if ds.treatment_kind != BINARY:
        raise ValueError("binary propensity model requires a binary treatment")
    if ds.d.min() == ds.d.max():
        raise NoTreatmentVariationError("both treatment arms must be non-empty")
    design = np.column_stack([np.ones(ds.n), ds.x])
    model = fit_logistic(design, ds.d)
    p1 = predict(model, design)
    return PropensityFit(
        kind=BINARY_LOGISTIC,
        scores=np.where(ds.d == 1.0, p1, 1.0 - p1),
        model=model,
        level_scores={1.0: p1, 0.0: 1.0 - p1},
    )


def estimate_propensity_multivalued(ds: ObservationalDataset) -> PropensityFit:
    """One-vs-rest logistic per declared level; stores P(D=level | x) for all levels."""
    if ds.treatment_kind != MULTIVALUED or ds.levels is None:
        raise ValueError("multivalued propensity model requires declared levels")
    design = np.column_stack([np.ones(ds.n), ds.x])
    level_scores: dict[float, np.ndarray] = {}
    for level in ds.levels:
        indicator = (ds.d == level).astype(float)
        if indicator.min() == indicator.max():
            raise NoTreatmentVariationError(f"level {level} is empty or exhaustive")
        model = fit_logistic(design, indicator)
        level_scores[float(level)] = predict(model, design)
    received = np.empty(ds.n)
    for level, p in level_scores.items():
        received[ds.d == level] = p[ds.d == level]
    return PropensityFit(
        kind=MULTIVALUED_LOGISTIC,
        scores=received,
        level_scores=level_scores,
    )


def estimate_gps_normal(ds: ObservationalDataset) -> PropensityFit:
    """Homoscedastic normal generalized propensity score for continuous doses.

    Fits OLS of d on (1, x); sigma is the residual standard deviation; each
    unit's score is the normal density of its dose at the fitted mean.
    """
    if ds.treatment_kind != CONTINUOUS:
        raise ValueError("gps model requires a continuous treatment")
    design = np.column_stack([np.ones(ds.n), ds.x])
    model = fit_ols(design, ds.d)
    dof = max(ds.n - design.shape[1], 1)
    sigma = float(np.sqrt(model.residuals @ model.residuals / dof))
    if sigma < _SIGMA_FLOOR:
        raise SigmaFloorError(f"residual scale {sigma:.2e} below floor {_SIGMA_FLOOR}")
    z = model.residuals / sigma
    dens = np.exp(-0.5 * z * z) / (sigma * np.sqrt(2.0 * np.pi))
    return PropensityFit(kind=GPS_NORMAL, scores=dens, model=model, sigma=sigma)


def trim_overlap(fit: PropensityFit, lo: float = 0.01, hi: float = 0.99):
    """Drop units whose received-dose score falls outside [lo, hi].

    Returns (trimmed_fit, kept_indices); the caller subsets its dataset with
    `kept_indices`. The dropped count is recorded in the fit diagnostics.
    """
    if fit.kind != BINARY_LOGISTIC:
        raise ValueError("trimming is defined for binary propensity fits")
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"require 0 <= lo < hi <= 1, got ({lo}, {hi})")
    keep = (fit.scores >= lo) & (fit.scores <= hi)
    kept_indices = np.flatnonzero(keep)
    if kept_indices.size == 0:
        raise AllUnitsTrimmedError(f"no unit has score inside [{lo}, {hi}]")
    diagnostics = dict(fit.diagnostics)
    diagnostics["n_dropped"] = int(fit.n - kept_indices.size)
    trimmed = replace(
        fit,
        scores=fit.scores[keep],
        level_scores={k: v[keep] for k, v in fit.level_scores.items()},
        trim_bounds=(lo, hi),
        diagnostics=diagnostics,
    )
    return trimmed, kept_indices


def quantile_strata(scores: np.ndarray, n_strata: int) -> np.ndarray:
    """Assign 0..J-1 stratum labels by sample-quantile edges of the scores.

    Edges are the j/J sample quantiles (linear interpolation); a score equal
    to an edge joins the upper stratum, so tied scores always share a label.
    """
    if n_strata < 1:
        raise ValueError("n_strata must be >= 1")
    if n_strata == 1:
        return np.zeros(np.asarray(scores).shape[0], dtype=int)
    edges = np.quantile(scores, np.arange(1, n_strata) / n_strata)
    return np.searchsorted(edges, scores, side="right")


@dataclass
class BalanceTable:
    """Standardized mean differences overall and within propensity strata.

    Attributes:
        overall: |mean_t - mean_c| / pooled sd, per covariate (length p).
        per_stratum: per-stratum SMDs on the full-sample pooled-sd scale,
            shape (J, p); NaN where a stratum lacks one arm.
        stratum_avg: size-weighted average of defined per-stratum SMDs.
        stratum_sizes: units per stratum.
        n_undefined_strata: strata that lack one arm entirely.
    """

    overall: np.ndarray
    per_stratum: np.ndarray
    stratum_avg: np.ndarray
    stratum_sizes: np.ndarray
    n_undefined_strata: int


def _pooled_sd(x: np.ndarray, treated: np.ndarray) -> np.ndarray:
    """Column-wise pooled standard deviation across the two arms."""
    xt = x[treated]
    xc = x[~treated]
    return np.sqrt((xt.var(ddof=0, axis=0) + xc.var(ddof=0, axis=0)) / 2.0)


def _smd(
    x: np.ndarray, treated: np.ndarray, scale: np.ndarray | None = None
) -> np.ndarray:
    """Column-wise standardized mean difference; 0 for zero-variance columns.

    Within-stratum differences are standardized by the full-sample pooled sd
    (passed as ``scale``) so strata are comparable on a common scale: a narrow
    stratum shrinks the mean difference, not the yardstick.
    """
    xt = x[treated]
    xc = x[~treated]
    if scale is None:
        scale = _pooled_sd(x, treated)
    diff = np.abs(xt.mean(axis=0) - xc.mean(axis=0))
    out = np.zeros(x.shape[1])
    nz = scale > 0
    out[nz] = diff[nz] / scale[nz]
    return out


def balance_diagnostic(
    ds: ObservationalDataset, fit: PropensityFit, n_strata: int = 5
) -> BalanceTable:
    """Covariate balance before and after stratifying on the estimated score.

    Strata that lack one treatment arm are reported as undefined (NaN rows)
    and excluded from the stratum-averaged SMD; this is diagnostic, not fatal.
    """
    if ds.treatment_kind != BINARY:
        raise ValueError("balance diagnostic requires a binary treatment")
    if n_strata < 2:
        raise ValueError("n_strata must be >= 2")
    treated = ds.d == 1.0
    if treated.all() or not treated.any():
        raise NoTreatmentVariationError("both arms required for balance checks")
    scale = _pooled_sd(ds.x, treated)
    overall = _smd(ds.x, treated, scale)
    labels = quantile_strata(fit.scores_treated, n_strata)
    p = ds.x.shape[1]
    per_stratum = np.full((n_strata, p), np.nan)
    sizes = np.zeros(n_strata, dtype=int)
    defined = np.zeros(n_strata, dtype=bool)
    for j in range(n_strata):
        in_j = labels == j
        sizes[j] = int(in_j.sum())
        tj = treated[in_j]
        if sizes[j] == 0 or tj.all() or not tj.any():
            continue
        per_stratum[j] = _smd(ds.x[in_j], tj, scale)
        defined[j] = True
    if p and defined.any():
        w = sizes[defined] / sizes[defined].sum()
        stratum_avg = w @ per_stratum[defined]
    else:
        stratum_avg = np.full(p, np.nan)
    return BalanceTable(
        overall=overall,
        per_stratum=per_stratum,
        stratum_avg=stratum_avg,
        stratum_sizes=sizes,
        n_undefined_strata=int(n_strata - defined.sum()),
    )
