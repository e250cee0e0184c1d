"""Uncertainty quantification: delta-method contrasts and the unit bootstrap.

The bootstrap resamples observations (or whole units, for panels) with
replacement, re-runs an arbitrary estimator on each replicate, and reports
the spread of the replicate estimates. Every replicate draws from its own
seeded stream, so results are bit-identical for a given seed regardless of
worker count or completion order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import CausalEstimate, PanelDataset
from .errors import (
    CausalestError,
    MissingCoefCovarianceError,
    TooManyFailedReplicatesError,
)
from .regress import IDENTITY, LinearFit


def delta_variance(fit: LinearFit, gradient) -> float:
    """Variance of a smooth scalar g(coef) via the delta method: g' V g."""
    if fit.coef_cov is None:
        raise MissingCoefCovarianceError(
            "fit carries no coefficient covariance; cannot form a delta variance"
        )
    g = np.asarray(gradient, dtype=float)
    if g.shape != (fit.coef.shape[0],):
        raise ValueError(
            f"gradient has shape {g.shape}, expected ({fit.coef.shape[0]},)"
        )
    return float(g @ fit.coef_cov @ g)


def normal_interval(point: float, variance: float, level: float = 0.95):
    """Symmetric normal-approximation interval around a point estimate."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if variance < 0:
        raise ValueError("variance must be non-negative")
    half = float(ndtri(0.5 + level / 2.0)) * float(np.sqrt(variance))
    return (point - half, point + half)


def delta_variance_or(ds, m1: LinearFit, m0: LinearFit) -> float:
    """Large-sample variance of the arm-regression ATE.

    `m1` and `m0` are identity-link fits of the outcome on (1, x) within the
    treated and control arms. The estimator is the mean over all units of
    m1(x_i) - m0(x_i); its variance combines the spread of the centered
    contrast with a delta-method term for each arm's coefficient noise:

        Var = mean[(m1(x_i) - m0(x_i) - tau)^2] / n + g' V1 g + g' V0 g

    where g is the average design row (1, mean x) and V1, V0 the coefficient
    covariances.
    """
    for fit in (m1, m0):
        if fit.link != IDENTITY:
            raise ValueError("arm models must use the identity link")
        if fit.coef_cov is None:
            raise MissingCoefCovarianceError("arm model lacks a coefficient covariance")
    design = np.column_stack([np.ones(ds.n), ds.x])
    if design.shape[1] != m1.design_width or design.shape[1] != m0.design_width:
        raise ValueError("arm models were not fitted on a (1, x) design of this dataset")
    contrast = design @ m1.coef - design @ m0.coef
    centered = contrast - contrast.mean()
    g = design.mean(axis=0)
    return float(
        centered @ centered / ds.n**2 + g @ m1.coef_cov @ g + g @ m0.coef_cov @ g
    )


@dataclass
class BootstrapResult:
    """Replicate summary from `bootstrap_variance`.

    Attributes:
        variance: sample variance of the successful replicate estimates.
        ci: percentile interval of the replicate estimates.
        points: per-replicate estimates, NaN where the replicate failed.
        n_ok: successful replicates.
        n_failed: replicates that raised an estimation error.
    """

    variance: float
    ci: tuple[float, float]
    points: np.ndarray
    n_ok: int
    n_failed: int


def _replicate_stream(seed: int, b: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,)))
    )


def bootstrap_variance(
    data,
    estimator,
    n_boot: int = 200,
    seed: int = 42,
    level: float = 0.95,
    jobs: int = 1,
    max_failure_share: float = 0.10,
) -> BootstrapResult:
    """Nonparametric bootstrap of an estimator over resampled data.

    `data` is an ObservationalDataset (rows resampled i.i.d.) or a
    PanelDataset (whole units resampled, keeping each unit's time series
    intact). `estimator` maps a dataset to a CausalEstimate or a float.
    Replicates that raise an estimation error are skipped; the failed share
    must stay below `max_failure_share` or the bootstrap aborts.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    is_panel = isinstance(data, PanelDataset)
    n_draw = data.n_units if is_panel else data.n

    def one(b: int) -> float:
        rng = _replicate_stream(seed, b)
        idx = rng.integers(0, n_draw, size=n_draw)
        sample = data.take_units(idx) if is_panel else data.take(idx)
        try:
            est = estimator(sample)
        except CausalestError:
            return np.nan
        return est.point if isinstance(est, CausalEstimate) else float(est)

    points = np.empty(n_boot)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for b, value in enumerate(pool.map(one, range(n_boot))):
                points[b] = value
    else:
        for b in range(n_boot):
            points[b] = one(b)

    ok = points[np.isfinite(points)]
    n_failed = int(n_boot - ok.size)
    if n_failed and n_failed >= max_failure_share * n_boot:
        raise TooManyFailedReplicatesError(
            f"{n_failed}/{n_boot} bootstrap replicates failed "
            f"(tolerance {max_failure_share:.0%})"
        )
    alpha = 1.0 - level
    lo, hi = np.quantile(ok, [alpha / 2.0, 1.0 - alpha / 2.0])
    return BootstrapResult(
        variance=float(ok.var(ddof=1)),
        ci=(float(lo), float(hi)),
        points=points,
        n_ok=int(ok.size),
        n_failed=n_failed,
    )
