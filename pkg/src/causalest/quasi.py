"""Estimators for non-ignorable assignment: instrumental variables and 2SLS,
difference-in-differences, synthetic control, and regression discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import CausalEstimate, _as_column_vector, _as_matrix, _readonly
from .errors import (
    DegenerateProblemError,
    DimensionMismatchError,
    EmptyCellError,
    NoFirstStageJumpError,
    NoTreatmentVariationError,
    OneSidedDataError,
    OrderConditionError,
    WeakInstrumentError,
)
from .regress import _svd_solve, fit_ols
from .variance import normal_interval

_COV_TOL = 1e-12
_FIRST_STAGE_JUMP_TOL = 0.05
_SC_MAX_ITER = 5000
_SC_GRAD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Instrumental variables
# ---------------------------------------------------------------------------

def iv_ratio(y, d, z) -> CausalEstimate:
    """Single-instrument IV estimate: Cov(z, y) / Cov(z, d)."""
    yv = _as_column_vector("y", y)
    dv = _as_column_vector("d", d)
    zv = _as_column_vector("z", z)
    if not (yv.shape[0] == dv.shape[0] == zv.shape[0]):
        raise DimensionMismatchError("y, d and z must have the same length")
    zc = zv - zv.mean()
    cov_zd = float(zc @ (dv - dv.mean())) / yv.shape[0]
    if abs(cov_zd) <= _COV_TOL:
        raise WeakInstrumentError(
            f"sample Cov(z, d) = {cov_zd:.2e} is numerically zero"
        )
    cov_zy = float(zc @ (yv - yv.mean())) / yv.shape[0]
    return CausalEstimate(
        estimand="ATE",
        method="iv_ratio",
        dose=1.0,
        ref_dose=0.0,
        point=cov_zy / cov_zd,
        n_used=yv.shape[0],
        diagnostics={"cov_zd": cov_zd},
    )


def ate_2sls(y, d, z, x=None) -> CausalEstimate:
    """Two-stage least squares with endogenous d and excluded instruments z.

    Exogenous covariates x (plus an intercept) are appended to the
    instrument set and to the second-stage regression. The point estimate is
    the coefficient on the first endogenous column; the variance uses
    second-stage residuals recomputed with the original (not fitted) d.
    """
    yv = _as_column_vector("y", y)
    n = yv.shape[0]
    dm = _as_matrix("d", d, n)
    zm = _as_matrix("z", z, n)
    xm = _as_matrix("x", x, n)
    n_endog = dm.shape[1]
    if n_endog < 1:
        raise DimensionMismatchError("at least one endogenous column is required")
    if zm.shape[1] < n_endog:
        raise OrderConditionError(
            f"{zm.shape[1]} instruments cannot identify {n_endog} endogenous columns"
        )

    exog = np.column_stack([np.ones(n), xm]) if xm.shape[1] else np.ones((n, 1))
    instruments = np.column_stack([exog, zm])
    first_coef, _ = _svd_solve(instruments, dm)
    d_hat = instruments @ first_coef

    # first-stage strength diagnostic, one F-style statistic per endogenous column
    f_stats = []
    dof_full = n - instruments.shape[1]
    restricted_coef, _ = _svd_solve(exog, dm)
    restricted_resid = dm - exog @ restricted_coef
    full_resid = dm - d_hat
    for m in range(n_endog):
        rss_f = float(full_resid[:, m] @ full_resid[:, m])
        rss_r = float(restricted_resid[:, m] @ restricted_resid[:, m])
        if rss_f <= 0.0 or dof_full < 1:
            f_stats.append(float("inf"))
        else:
            f_stats.append(((rss_r - rss_f) / zm.shape[1]) / (rss_f / dof_full))

    second = np.column_stack([np.ones(n), d_hat, xm])
    coef, xtx_inv = _svd_solve(second, yv)
    resid = yv - np.column_stack([np.ones(n), dm, xm]) @ coef
    k2 = second.shape[1]
    sigma2 = float(resid @ resid) / max(n - k2, 1)
    coef_cov = sigma2 * xtx_inv
    point = float(coef[1])
    var = float(coef_cov[1, 1])
    return CausalEstimate(
        estimand="ATE",
        method="2sls",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=n,
        diagnostics={
            "n_instruments": int(zm.shape[1]),
            "n_endogenous": int(n_endog),
            "first_stage_f": f_stats if n_endog > 1 else f_stats[0],
        },
    )


# ---------------------------------------------------------------------------
# Difference in differences
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DidDataset:
    """Grouped two-period (or multi-period) outcome data.

    Attributes:
        y: outcomes, length n.
        group: 0/1 ever-treated indicator per row.
        period: integer period per row (0/1 basic; 0..T multi-period).
        x: optional covariate matrix (n, p).
        treated: optional explicit row-level treatment indicator for
            multi-period designs; defaults to group x period in the basic
            two-period design.
    """

    y: np.ndarray
    group: np.ndarray
    period: np.ndarray
    x: np.ndarray
    treated: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.y.shape[0]


def validate_did(y, group, period, x=None, treated=None) -> DidDataset:
    """Validate raw columns into a DidDataset."""
    yv = _as_column_vector("y", y)
    n = yv.shape[0]
    gv = _as_column_vector("group", group)
    pv = _as_column_vector("period", period)
    if gv.shape[0] != n or pv.shape[0] != n:
        raise DimensionMismatchError("y, group and period must have the same length")
    if not np.isin(gv, (0.0, 1.0)).all():
        raise ValueError("group must be a 0/1 indicator")
    if np.any(pv != np.round(pv)) or pv.min() < 0:
        raise ValueError("period must contain non-negative integers")
    xm = _as_matrix("x", x, n)
    tv = None
    if treated is not None:
        tv = _as_column_vector("treated", treated)
        if tv.shape[0] != n:
            raise DimensionMismatchError("treated must match the length of y")
        if not np.isin(tv, (0.0, 1.0)).all():
            raise ValueError("treated must be a 0/1 indicator")
        tv = _readonly(tv)
    return DidDataset(
        y=_readonly(yv),
        group=_readonly(gv),
        period=_readonly(pv),
        x=_readonly(xm),
        treated=tv,
    )


def _did_cells(dd: DidDataset):
    if not set(np.unique(dd.period)) <= {0.0, 1.0}:
        raise ValueError("the basic design requires periods in {0, 1}")
    for g in (0.0, 1.0):
        for p in (0.0, 1.0):
            if not np.any((dd.group == g) & (dd.period == p)):
                raise EmptyCellError(f"no observations with group={g:g}, period={p:g}")


def _did_ols(dd: DidDataset, with_x: bool, method: str) -> CausalEstimate:
    _did_cells(dd)
    cols = [np.ones(dd.n), dd.group, dd.period, dd.group * dd.period]
    if with_x:
        cols.append(dd.x)
    fit = fit_ols(np.column_stack(cols), dd.y)
    point = float(fit.coef[3])
    var = float(fit.coef_cov[3, 3])
    return CausalEstimate(
        estimand="ATE",
        method=method,
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=dd.n,
        diagnostics={},
    )


def ate_did(dd: DidDataset) -> CausalEstimate:
    """Two-period difference-in-differences: the interaction coefficient of
    OLS on (1, group, period, group x period), equal to the double difference
    of cell means in the saturated 2x2 design."""
    return _did_ols(dd, with_x=False, method="did")


def ate_did_covariates(dd: DidDataset) -> CausalEstimate:
    """Two-period DID with covariate columns added to the regression."""
    if dd.x.shape[1] == 0:
        raise ValueError("the dataset carries no covariates")
    return _did_ols(dd, with_x=True, method="did_covariates")


def ate_did_multiperiod(dd: DidDataset) -> CausalEstimate:
    """Multi-period DID: group indicator, time dummies, and a row-level
    treatment indicator whose coefficient is the effect estimate."""
    periods = np.unique(dd.period)
    if dd.treated is not None:
        treated = dd.treated
    elif set(periods) == {0.0, 1.0}:
        treated = dd.group * dd.period
    else:
        raise ValueError("multi-period designs require an explicit treated indicator")
    if treated.min() == treated.max():
        raise NoTreatmentVariationError("the treatment indicator never varies")
    cols = [np.ones(dd.n), dd.group]
    for t in periods[1:]:
        cols.append((dd.period == t).astype(float))
    cols.append(treated)
    fit = fit_ols(np.column_stack(cols), dd.y)
    point = float(fit.coef[-1])
    var = float(fit.coef_cov[-1, -1])
    return CausalEstimate(
        estimand="ATE",
        method="did_multiperiod",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=dd.n,
        diagnostics={"n_periods": int(periods.size)},
    )


# ---------------------------------------------------------------------------
# Synthetic control
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScProblem:
    """A synthetic-control problem.

    Attributes:
        x1: treated-unit characteristics, length K.
        x0: donor characteristics, shape (K, J).
        z1: treated pre-period outcomes, length T_pre.
        z0: donor pre-period outcomes, shape (T_pre, J).
        y1: treated post-period outcomes, length T_post.
        y0: donor post-period outcomes, shape (T_post, J).
    """

    x1: np.ndarray
    x0: np.ndarray
    z1: np.ndarray
    z0: np.ndarray
    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        x1 = _readonly(_as_column_vector("x1", self.x1))
        z1 = _readonly(_as_column_vector("z1", self.z1))
        y1 = _readonly(_as_column_vector("y1", self.y1))
        x0 = _readonly(np.asarray(self.x0, dtype=float))
        z0 = _readonly(np.asarray(self.z0, dtype=float))
        y0 = _readonly(np.asarray(self.y0, dtype=float))
        if x0.ndim != 2 or z0.ndim != 2 or y0.ndim != 2:
            raise DimensionMismatchError("x0, z0 and y0 must be matrices")
        if not (np.isfinite(x0).all() and np.isfinite(z0).all() and np.isfinite(y0).all()):
            raise ValueError("donor matrices must be finite")
        j = x0.shape[1]
        if j < 1:
            raise DimensionMismatchError("at least one donor is required")
        if z0.shape[1] != j or y0.shape[1] != j:
            raise DimensionMismatchError("x0, z0 and y0 must share the donor count")
        if x0.shape[0] != x1.shape[0]:
            raise DimensionMismatchError("x0 rows must match the length of x1")
        if z0.shape[0] != z1.shape[0]:
            raise DimensionMismatchError("z0 rows must match the length of z1")
        if y0.shape[0] != y1.shape[0]:
            raise DimensionMismatchError("y0 rows must match the length of y1")
        if z1.shape[0] < 1:
            raise DimensionMismatchError("at least one pre period is required")
        for name, v in (("x1", x1), ("x0", x0), ("z1", z1), ("z0", z0), ("y1", y1), ("y0", y0)):
            object.__setattr__(self, name, v)

    @property
    def n_donors(self) -> int:
        return self.x0.shape[1]


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} via the sort method."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u - css / np.arange(1, v.shape[0] + 1) > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def sc_weights(x1, x0, v_diag) -> np.ndarray:
    """Simplex-constrained weights minimizing (x1 - x0 w)' V (x1 - x0 w).

    Solved by projected gradient descent with a fixed step 1/L; a donor whose
    column equals x1 exactly short-circuits to weight one (lowest index on
    ties).
    """
    x1v = _as_column_vector("x1", x1)
    x0m = np.asarray(x0, dtype=float)
    if x0m.ndim != 2 or x0m.shape[0] != x1v.shape[0]:
        raise DimensionMismatchError("x0 must be a (K, J) matrix matching x1")
    v = np.asarray(v_diag, dtype=float)
    if v.shape != (x1v.shape[0],):
        raise DimensionMismatchError("v_diag must have one entry per characteristic")
    if np.any(v < 0.0) or not np.any(v > 0.0):
        raise ValueError("v_diag entries must be >= 0 with at least one positive")
    j = x0m.shape[1]
    if j == 1:
        return np.ones(1)
    for jj in range(j):
        if np.array_equal(x0m[:, jj], x1v):
            w = np.zeros(j)
            w[jj] = 1.0
            return w

    sqrt_v = np.sqrt(v)
    a = x0m * sqrt_v[:, None]
    b = x1v * sqrt_v
    lip = 2.0 * float(np.linalg.svd(a, compute_uv=False)[0]) ** 2
    w = np.full(j, 1.0 / j)
    if lip <= 0.0:
        return w
    step = 1.0 / lip
    for _ in range(_SC_MAX_ITER):
        grad = 2.0 * a.T @ (a @ w - b)
        w_next = _project_simplex(w - step * grad)
        if float(np.linalg.norm(w_next - w)) / step <= _SC_GRAD_TOL:
            w = w_next
            break
        w = w_next
    return w


@dataclass
class ScFit:
    """Fitted synthetic control.

    Attributes:
        weights: donor weights on the simplex.
        v: diagonal predictor weights found by the outer search.
        gap: per-post-period treated-minus-synthetic outcome differences.
        pre_rmse: root-mean-squared pre-period fit error.
        estimate: the post-period mean gap as a CausalEstimate.
    """

    weights: np.ndarray
    v: np.ndarray
    gap: np.ndarray
    pre_rmse: float
    estimate: CausalEstimate = field(repr=False)


def sc_fit(problem: ScProblem) -> ScFit:
    """Fit a synthetic control with a nested optimization.

    Inner: simplex-constrained donor weights for a given diagonal V.
    Outer: Nelder-Mead over softmax-parameterized V (multi-start from the
    uniform V and each one-hot corner) minimizing the pre-period outcome
    mismatch of the induced weights.
    """
    k = problem.x1.shape[0]
    j = problem.n_donors
    if j >= 2:
        stacked = np.vstack([problem.x0, problem.z0])
        if all(np.array_equal(stacked[:, jj], stacked[:, 0]) for jj in range(1, j)):
            raise DegenerateProblemError("all donors are identical")

    def pre_mismatch(theta: np.ndarray) -> float:
        e = np.exp(theta - theta.max())
        w = sc_weights(problem.x1, problem.x0, e / e.sum())
        r = problem.z1 - problem.z0 @ w
        return float(r @ r)

    if j == 1:
        weights = np.ones(1)
        v_best = np.full(k, 1.0 / k)
    else:
        starts = [np.zeros(k)]
        for corner in range(k):
            theta = np.zeros(k)
            theta[corner] = 10.0
            starts.append(theta)
        best = None
        for theta0 in starts:
            res = minimize(pre_mismatch, theta0, method="Nelder-Mead")
            if best is None or res.fun < best.fun:
                best = res
        e = np.exp(best.x - best.x.max())
        v_best = e / e.sum()
        weights = sc_weights(problem.x1, problem.x0, v_best)

    pre_resid = problem.z1 - problem.z0 @ weights
    gap = problem.y1 - problem.y0 @ weights
    point = float(gap.mean())
    estimate = CausalEstimate(
        estimand="ATE",
        method="synthetic_control",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        n_used=int(gap.shape[0]),
        diagnostics={"pre_rmse": float(np.sqrt(np.mean(pre_resid**2)))},
    )
    return ScFit(
        weights=weights,
        v=v_best,
        gap=gap,
        pre_rmse=float(np.sqrt(np.mean(pre_resid**2))),
        estimate=estimate,
    )


# ---------------------------------------------------------------------------
# Regression discontinuity
# ---------------------------------------------------------------------------

def _rdd_frame(y, t, cutoff, bandwidth):
    yv = _as_column_vector("y", y)
    tv = _as_column_vector("t", t)
    if yv.shape[0] != tv.shape[0]:
        raise DimensionMismatchError("y and t must have the same length")
    tc = tv - float(cutoff)
    if bandwidth is not None:
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        keep = np.abs(tc) <= bandwidth
        yv, tc = yv[keep], tc[keep]
    above = (tc >= 0.0).astype(float)
    n_right = int(above.sum())
    if n_right == 0 or n_right == above.shape[0]:
        raise OneSidedDataError("observations are required on both sides of the cutoff")
    return yv, tc, above, keep if bandwidth is not None else None


def rdd_sharp(y, t, cutoff: float = 0.0, bandwidth: float | None = None) -> CausalEstimate:
    """Sharp RDD: OLS of y on (1, D, t-c, D(t-c)) with D = 1[t >= c].

    The point estimate is the coefficient on D — the jump in the conditional
    expectation at the cutoff. An optional bandwidth restricts the fit to
    |t - c| <= bandwidth.
    """
    yv, tc, above, _ = _rdd_frame(y, t, cutoff, bandwidth)
    fit = fit_ols(np.column_stack([np.ones(yv.shape[0]), above, tc, above * tc]), yv)
    point = float(fit.coef[1])
    var = float(fit.coef_cov[1, 1])
    return CausalEstimate(
        estimand="ATE",
        method="rdd_sharp",
        dose=1.0,
        ref_dose=0.0,
        point=point,
        variance=var,
        ci=normal_interval(point, var),
        n_used=yv.shape[0],
        diagnostics={
            "cutoff": float(cutoff),
            "bandwidth": bandwidth,
            "n_right": int(above.sum()),
            "n_left": int(yv.shape[0] - above.sum()),
        },
    )


def rdd_fuzzy(
    y, t, d, cutoff: float = 0.0, bandwidth: float | None = None
) -> CausalEstimate:
    """Fuzzy RDD: 2SLS with observed treatment instrumented by 1[t >= c].

    The slope terms (t-c) and 1[t>=c](t-c) enter as exogenous controls. The
    assignment probability must jump at the cutoff; a first-stage jump of
    0.05 or less raises NoFirstStageJumpError.
    """
    yv, tc, above, keep = _rdd_frame(y, t, cutoff, bandwidth)
    dv = _as_column_vector("d", d)
    if keep is not None:
        dv = dv[keep]
    if dv.shape[0] != yv.shape[0]:
        raise DimensionMismatchError("d must have the same length as y")
    n = yv.shape[0]
    first = fit_ols(np.column_stack([np.ones(n), above, tc, above * tc]), dv)
    jump = float(first.coef[1])
    if abs(jump) <= _FIRST_STAGE_JUMP_TOL:
        raise NoFirstStageJumpError(
            f"assignment probability jump {jump:.4f} is within the "
            f"{_FIRST_STAGE_JUMP_TOL} tolerance"
        )
    est = ate_2sls(yv, dv, z=above, x=np.column_stack([tc, above * tc]))
    diagnostics = dict(est.diagnostics)
    diagnostics.update(
        {
            "cutoff": float(cutoff),
            "bandwidth": bandwidth,
            "first_stage_jump": jump,
        }
    )
    return CausalEstimate(
        estimand="ATE",
        method="rdd_fuzzy",
        dose=1.0,
        ref_dose=0.0,
        point=est.point,
        variance=est.variance,
        ci=est.ci,
        n_used=n,
        diagnostics=diagnostics,
    )
