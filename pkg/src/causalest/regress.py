"""Linear and logistic regression building blocks used by every estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    NoTreatmentVariationError,
    RankDeficientError,
    SeparationError,
)

IDENTITY = "identity"
LOGIT = "logit"

#: smallest (singular value / largest singular value) accepted as full rank
RANK_RTOL = 1e-10
#: fitted probability considered pinned to the boundary
_SEP_PROB = 1e-10
#: coefficient magnitude that, together with pinned probabilities, flags separation
_SEP_COEF = 30.0
#: max |response - probability| below which the classes are perfectly fitted
_SEP_RESID = 1e-6


@dataclass
class LinearFit:
    """A fitted linear or logistic model.

    Attributes:
        coef: estimated coefficients, length k.
        link: "identity" (OLS) or "logit" (IRLS logistic).
        residuals: response-scale residuals (y - fitted), length n.
        coef_cov: asymptotic covariance of coef, shape (k, k).
        design_width: k, for prediction-time shape checking.
        converged: True when the fit met its convergence criterion.
        iterations: IRLS iterations used (0 for OLS).
    """

    coef: np.ndarray
    link: str
    residuals: np.ndarray
    coef_cov: np.ndarray | None
    design_width: int
    converged: bool = True
    iterations: int = 0


def _check_design(design, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    r = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != r.shape[0]:
        raise DimensionMismatchError(
            f"design has {X.shape[0]} rows but response has {r.shape[0]}"
        )
    return X, r


def _svd_solve(Xw: np.ndarray, yw: np.ndarray):
    """Least-squares solve via SVD; returns (coef, xtx_inv).

    Raises RankDeficientError when the singular-value ratio falls below
    RANK_RTOL (or the system is under-determined).
    """
    n, k = Xw.shape
    if n < k:
        raise RankDeficientError(f"n={n} rows cannot identify k={k} coefficients")
    U, s, Vt = np.linalg.svd(Xw, full_matrices=False)
    if s[0] == 0.0 or s[-1] / s[0] < RANK_RTOL:
        raise RankDeficientError(
            f"design is rank deficient (singular-value ratio {0.0 if s[0] == 0 else s[-1] / s[0]:.2e})"
        )
    uty = U.T @ yw
    coef = Vt.T @ (uty / (s[:, None] if uty.ndim == 2 else s))
    xtx_inv = (Vt.T / s**2) @ Vt
    return coef, xtx_inv


def fit_ols(design, y, weights=None) -> LinearFit:
    """Ordinary (or weighted) least squares via orthogonal decomposition.

    Minimizes the (weighted) residual sum of squares; the coefficient
    covariance is sigma^2 (X' W X)^-1 with sigma^2 = RSS / (n - k).

    Raises:
        RankDeficientError: collinear or under-determined design.
        DimensionMismatchError: inconsistent shapes.
    """
    X, r = _check_design(design, y)
    n, k = X.shape
    if weights is not None:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise DimensionMismatchError("weights length does not match rows")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        sw = np.sqrt(w)
        Xw = X * sw[:, None]
        yw = r * sw
    else:
        w = None
        Xw, yw = X, r

    coef, xtx_inv = _svd_solve(Xw, yw)
    fitted = X @ coef
    resid = r - fitted
    wrss = float(((resid * np.sqrt(w)) ** 2).sum()) if w is not None else float(resid @ resid)
    sigma2 = wrss / (n - k) if n > k else 0.0
    return LinearFit(
        coef=coef,
        link=IDENTITY,
        residuals=resid,
        coef_cov=sigma2 * xtx_inv,
        design_width=k,
    )


def logistic_loglik(design, d, coef) -> float:
    """Bernoulli log-likelihood at `coef` (numerically stable form)."""
    X, dv = _check_design(design, d)
    eta = X @ np.asarray(coef, dtype=float)
    # log(1 + exp(eta)) without overflow
    log1pexp = np.where(eta > 30, eta, np.log1p(np.exp(np.minimum(eta, 30))))
    return float(dv @ eta - log1pexp.sum())


def logistic_score(design, d, coef) -> np.ndarray:
    """Gradient of the Bernoulli log-likelihood: X'(d - p)."""
    X, dv = _check_design(design, d)
    p = expit(X @ np.asarray(coef, dtype=float))
    return X.T @ (dv - p)


def fit_logistic(design, d, max_iter: int = 100, tol: float = 1e-8) -> LinearFit:
    """Logistic regression by iteratively reweighted least squares.

    Starts from coef = 0 and iterates Newton/IRLS steps until the score
    vector satisfies max|score| < tol.

    Raises:
        NoTreatmentVariationError: d has a single class.
        SeparationError: probabilities pinned at 0/1 with |coef| > 30, or
            every response fitted to within 1e-6 (wide-margin separation).
        ConvergenceError: max_iter exhausted.
    """
    X, dv = _check_design(design, d)
    if not np.all((dv == 0.0) | (dv == 1.0)):
        raise ValueError("logistic response must be 0/1")
    if dv.min() == dv.max():
        raise NoTreatmentVariationError("response takes a single value")

    n, k = X.shape
    coef = np.zeros(k)
    for it in range(1, max_iter + 1):
        eta = X @ coef
        p = expit(eta)
        pinned = (p < _SEP_PROB) | (p > 1.0 - _SEP_PROB)
        if np.any(pinned) and np.max(np.abs(coef)) > _SEP_COEF:
            raise SeparationError(
                "fitted probabilities pinned at 0/1 with diverging coefficients"
            )
        # Wide-margin separation saturates expit before the coefficients
        # look large: every response then fits essentially exactly and the
        # score underflows, which would masquerade as convergence.
        if np.max(np.abs(dv - p)) < _SEP_RESID:
            raise SeparationError(
                "every response fitted to machine precision; classes are separated"
            )
        score = X.T @ (dv - p)
        if np.max(np.abs(score)) < tol:
            w = p * (1.0 - p)
            _, xtwx_inv = _svd_solve(X * np.sqrt(w)[:, None], np.zeros(n))
            return LinearFit(
                coef=coef,
                link=LOGIT,
                residuals=dv - p,
                coef_cov=xtwx_inv,
                design_width=k,
                converged=True,
                iterations=it - 1,
            )
        w = np.maximum(p * (1.0 - p), 1e-12)
        sw = np.sqrt(w)
        # Newton step as a weighted least-squares solve on the working response
        step, _ = _svd_solve(X * sw[:, None], (dv - p) / sw)
        coef = coef + step
    raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations")


def predict(fit: LinearFit, design_new) -> np.ndarray:
    """Evaluate a fit on new design rows (expit-transformed for logit)."""
    X = np.asarray(design_new, dtype=float)
    if X.ndim == 1:
        # a single design row, or a column of one-regressor rows
        X = X.reshape(1, -1) if X.size == fit.design_width and fit.design_width > 1 else X.reshape(-1, 1)
    if X.shape[1] != fit.design_width:
        raise DimensionMismatchError(
            f"design_new has width {X.shape[1]}, fit expects {fit.design_width}"
        )
    eta = X @ fit.coef
    return expit(eta) if fit.link == LOGIT else eta
