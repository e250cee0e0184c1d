"""Cross-sectional effect estimators: OR, IPW, PSR, stratification,
matching and the augmented (doubly robust) combination."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import expit

from causalest import (
    OrSpec,
    PropensityFit,
    apo_ipw,
    apo_or,
    ate_dr,
    ate_ipw,
    ate_matching,
    ate_or,
    ate_psr,
    ate_stratification,
    difference_in_means,
    estimate_propensity_binary,
    validate,
)
from causalest.errors import (
    EmptyDoseGroupError,
    InsufficientMatchesError,
    NoUsableStratumError,
    ZeroPropensityError,
)

from .conftest import confounded_binary, philox, randomized_binary


@pytest.fixture(scope="module")
def cs1_mc_points():
    """1,000 confounded draws at n=1,000 with an estimated score per draw,
    shared by the Monte Carlo recovery tests in this module."""
    psr_points, strat_points = [], []
    for i in range(1000):
        ds = confounded_binary(3000 + i, 1000)
        fit = estimate_propensity_binary(ds)
        psr_points.append(ate_psr(ds, fit, poly_degree=2).point)
        strat_points.append(ate_stratification(ds, fit, n_strata=5).point)
    return {"psr": np.array(psr_points), "strat": np.array(strat_points)}


class TestOrSpec:
    def test_unknown_link(self):
        with pytest.raises(ValueError, match="unknown link"):
            OrSpec(link="probit")

    def test_bad_column_index(self):
        ds = confounded_binary(30, 50)
        with pytest.raises(ValueError, match="does not exist"):
            ate_or(ds, spec=OrSpec(covariate_selection=(3,)))

    def test_empty_selection_drops_covariates(self):
        # [TRIVIAL] selecting no columns reduces to the treatment-only model
        ds = confounded_binary(31, 200)
        est = ate_or(ds, spec=OrSpec(covariate_selection=()))
        assert est.point == pytest.approx(difference_in_means(ds).point, abs=1e-12)


class TestOutcomeRegression:
    def test_exact_linear_dgp(self):
        # [TRIVIAL] y = 3 + 2d with no noise: prediction at dose 5 is 13
        d = np.array([0.0, 1.0, 2.0, 3.0])
        ds = validate(3.0 + 2.0 * d, d)
        assert apo_or(ds, 5.0).point == pytest.approx(13.0, abs=1e-10)

    def test_no_covariates_equals_difference_in_means(self):
        # [TRIVIAL] saturated-in-d model reproduces the two arm means
        ds = randomized_binary(32, 150)
        est = ate_or(ds, spec=OrSpec(covariate_selection=()))
        dim = difference_in_means(ds)
        assert est.point == pytest.approx(dim.point, abs=1e-12)
        assert apo_or(ds, 1.0, OrSpec(covariate_selection=())).point - apo_or(
            ds, 0.0, OrSpec(covariate_selection=())
        ).point == pytest.approx(dim.point, abs=1e-12)

    def test_identical_doses_give_zero(self):
        ds = randomized_binary(33, 100)
        assert ate_or(ds, 1.0, 1.0).point == 0.0

    def test_randomized_linear_recovery(self):
        # [DERIVED] direct simulation with known coefficients
        g = philox(34)
        n = 10_000
        x = g.normal(size=n)
        d = (g.uniform(size=n) < 0.5).astype(float)
        y = 1.0 + 2.0 * d + 0.5 * x + g.normal(size=n)
        est = ate_or(validate(y, d, x))
        assert est.point == pytest.approx(2.0, abs=0.05)

    def test_interactions_equal_per_arm_fits(self):
        # [DERIVED] oracle: a fully interacted pooled fit predicts exactly
        # like two separate per-arm regressions
        ds = confounded_binary(35, 400)
        est = ate_or(ds, spec=OrSpec(interactions_with_d=True))
        treated = ds.d == 1.0
        design = np.column_stack([np.ones(ds.n), ds.x])
        bt, *_ = np.linalg.lstsq(design[treated], ds.y[treated], rcond=None)
        bc, *_ = np.linalg.lstsq(design[~treated], ds.y[~treated], rcond=None)
        oracle = (design @ bt - design @ bc).mean()
        assert est.point == pytest.approx(oracle, abs=1e-10)

    def test_logit_link_averages_response_scale(self):
        # predictions are inverted through the link before averaging
        g = philox(36)
        n = 500
        x = g.normal(size=n)
        d = (g.uniform(size=n) < 0.5).astype(float)
        y = (g.uniform(size=n) < expit(0.3 + 0.8 * d + x)).astype(float)
        ds = validate(y, d, x, treatment_kind="binary")
        spec = OrSpec(link="logit")
        est = apo_or(ds, 1.0, spec)
        from causalest import fit_outcome_model

        fit = fit_outcome_model(ds, spec)
        design1 = np.column_stack([np.ones(n), np.ones(n), x])
        assert est.point == pytest.approx(expit(design1 @ fit.coef).mean(), abs=1e-12)


class TestIpw:
    def test_apo_hand_example(self):
        # [DERIVED] hand evaluation: (1/4)(3/0.5 + 5/0.5) = 4
        ds = validate([3.0, 5.0, 2.0, 4.0], [1.0, 1.0, 0.0, 0.0])
        fit = PropensityFit.from_scores([0.5] * 4, ds.d)
        assert apo_ipw(ds, fit, 1.0).point == pytest.approx(4.0, abs=1e-12)

    def test_ate_hand_example(self):
        # [DERIVED] hand evaluation: (1/4)(6 + 10 - 4 - 8) = 1
        ds = validate([3.0, 5.0, 2.0, 4.0], [1.0, 1.0, 0.0, 0.0])
        fit = PropensityFit.from_scores([0.5] * 4, ds.d)
        est = ate_ipw(ds, fit)
        assert est.point == pytest.approx(1.0, abs=1e-12)
        assert est.diagnostics == {"n_at_dose": 2, "n_at_ref": 2}

    def test_constant_share_reduces_to_arm_mean(self):
        # [TRIVIAL] Horvitz-Thompson with the empirical share as weight
        ds = validate([3.0, 6.0, 9.0, 5.0], [1.0, 1.0, 1.0, 0.0])
        fit = PropensityFit.from_scores([0.75] * 4, ds.d)
        assert apo_ipw(ds, fit, 1.0).point == pytest.approx(6.0, abs=1e-12)

    def test_empty_dose_group(self):
        ds = validate([1.0, 2.0], [1.0, 0.0])
        fit = PropensityFit.from_scores([0.5, 0.5], ds.d)
        with pytest.raises(EmptyDoseGroupError):
            apo_ipw(ds, fit, 2.0)

    def test_zero_propensity_floor(self):
        ds = validate([1.0, 2.0], [1.0, 0.0])
        fit = PropensityFit.from_scores([1e-15, 0.5], ds.d)
        with pytest.raises(ZeroPropensityError):
            apo_ipw(ds, fit, 1.0)

    def test_floor_ignores_off_indicator_units(self):
        # a vanishing treated-probability on a CONTROL unit never divides
        ds = validate([1.0, 2.0, 3.0], [0.0, 1.0, 0.0])
        fit = PropensityFit.from_scores([1e-15, 0.5, 0.1], ds.d)
        est = ate_ipw(ds, fit)
        assert np.isfinite(est.point)


class TestPsr:
    def test_additive_polynomial_oracle(self):
        # [DERIVED] oracle: effect reads off the treatment coefficient of
        # y ~ (1, d, p, p^2) solved by normal equations
        ds = confounded_binary(37, 300)
        p1 = expit(2.0 + 0.5 * ds.x[:, 0])
        fit = PropensityFit.from_scores(p1, ds.d)
        est = ate_psr(ds, fit, poly_degree=2)
        design = np.column_stack([np.ones(ds.n), ds.d, p1, p1**2])
        beta, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
        assert est.point == pytest.approx(beta[1], abs=1e-10)

    def test_interaction_contrast_oracle(self):
        # [DERIVED] with d-by-score interactions the averaged contrast is
        # beta_d + beta_{dp} * mean(p)
        ds = confounded_binary(38, 300)
        p1 = expit(2.0 + 0.5 * ds.x[:, 0])
        fit = PropensityFit.from_scores(p1, ds.d)
        est = ate_psr(ds, fit, poly_degree=1, interactions=True)
        design = np.column_stack([np.ones(ds.n), ds.d, p1, ds.d * p1])
        beta, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
        assert est.point == pytest.approx(beta[1] + beta[3] * p1.mean(), abs=1e-10)

    def test_degenerate_constant_score(self):
        # [TRIVIAL] constant score carries no information: difference in means
        ds = randomized_binary(39, 120)
        fit = PropensityFit.from_scores([0.5] * ds.n, ds.d)
        est = ate_psr(ds, fit, poly_degree=3)
        assert est.diagnostics["degenerate_score"] is True
        assert est.point == pytest.approx(difference_in_means(ds).point, abs=1e-12)

    def test_identical_doses_give_zero(self):
        ds = randomized_binary(40, 100)
        fit = estimate_propensity_binary(ds)
        assert ate_psr(ds, fit, dose=1.0, ref_dose=1.0).point == 0.0

    def test_poly_degree_validated(self):
        ds = randomized_binary(41, 50)
        fit = estimate_propensity_binary(ds)
        with pytest.raises(ValueError, match="poly_degree"):
            ate_psr(ds, fit, poly_degree=0)

    def test_requires_binary(self):
        d = np.linspace(0.0, 3.0, 30)
        ds = validate(np.ones(30), d, np.ones(30))
        fit = PropensityFit.from_scores([0.5] * 30, (d > 1).astype(float))
        with pytest.raises(ValueError, match="binary"):
            ate_psr(ds, fit)

    def test_monte_carlo_recovery_degree2(self, cs1_mc_points):
        # [DERIVED] Monte Carlo against the known effect -5
        av = cs1_mc_points["psr"].mean()
        assert abs(av - (-5.0)) < 0.15


class TestStratification:
    def test_hand_weighted_average(self):
        # [DERIVED] hand evaluation: 0.4*(5-3) + 0.6*(9-8) = 1.4
        y = np.array([5.0, 5.0, 3.0, 3.0, 9.0, 9.0, 9.0, 8.0, 8.0, 8.0])
        d = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
        p1 = np.array([0.2] * 4 + [0.8] * 6)
        ds = validate(y, d)
        fit = PropensityFit.from_scores(p1, d)
        est = ate_stratification(ds, fit, n_strata=2)
        assert est.point == pytest.approx(1.4, abs=1e-12)
        assert est.n_used == 10

    def test_one_stratum_equals_difference_in_means(self):
        # [TRIVIAL] J=1 collapses to the plain contrast
        ds = randomized_binary(42, 80)
        fit = estimate_propensity_binary(ds)
        est = ate_stratification(ds, fit, n_strata=1)
        assert est.point == pytest.approx(difference_in_means(ds).point, abs=1e-12)

    def test_missing_arm_renormalizes(self):
        y = np.array([5.0, 5.0, 3.0, 3.0, 4.0, 4.0, 3.0, 3.0, 7.0, 7.0, 7.0, 7.0])
        d = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0])
        p1 = np.array([0.1] * 4 + [0.5] * 4 + [0.9] * 4)
        ds = validate(y, d)
        est = ate_stratification(ds, PropensityFit.from_scores(p1, d), n_strata=3)
        # usable strata have diffs 2 and 1 with equal renormalized weights
        assert est.point == pytest.approx(1.5, abs=1e-12)
        assert est.n_used == 8
        assert est.diagnostics["n_unusable_strata"] == 1
        assert est.diagnostics["n_excluded_units"] == 4

    def test_no_usable_stratum(self):
        d = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
        p1 = np.array([0.2] * 3 + [0.8] * 3)
        ds = validate(np.ones(6), d)
        with pytest.raises(NoUsableStratumError):
            ate_stratification(ds, PropensityFit.from_scores(p1, d), n_strata=2)

    def test_variance_requires_two_per_arm(self):
        y = np.array([5.0, 3.0, 4.0])
        d = np.array([1.0, 0.0, 0.0])  # singleton treated arm
        ds = validate(y, d)
        fit = PropensityFit.from_scores([0.5] * 3, d)
        est = ate_stratification(ds, fit, n_strata=1)
        assert est.variance is None and est.ci is None

    def test_monte_carlo_quintile_blocking(self, cs1_mc_points):
        # [DERIVED] Monte Carlo: quintile blocking removes most confounding
        av = cs1_mc_points["strat"].mean()
        assert abs(av - (-5.0)) < 0.25


class TestMatching:
    def test_hand_example(self):
        # [DERIVED] hand evaluation of the matched-set formula: every
        # imputation contributes an effect of 3
        y = np.array([5.0, 4.0, 2.0, 1.0])
        d = np.array([1.0, 1.0, 0.0, 0.0])
        p1 = np.array([0.6, 0.3, 0.55, 0.25])
        ds = validate(y, d)
        est = ate_matching(ds, PropensityFit.from_scores(p1, d), n_matches=1)
        assert est.point == pytest.approx(3.0, abs=1e-12)
        assert est.variance is None

    def test_distance_tie_goes_to_lowest_index(self):
        y = np.array([10.0, 0.0, 2.0])
        d = np.array([1.0, 0.0, 0.0])
        p1 = np.array([0.5, 0.4, 0.6])  # both controls 0.1 away
        ds = validate(y, d)
        est = ate_matching(ds, PropensityFit.from_scores(p1, d), n_matches=1)
        assert est.point == pytest.approx((10.0 + 10.0 + 8.0) / 3.0, abs=1e-12)

    def test_identical_pairs_give_zero(self):
        # [TRIVIAL] equal outcomes in tied matched pairs cancel exactly
        ds = validate([4.0, 4.0], [1.0, 0.0])
        fit = PropensityFit.from_scores([0.5, 0.5], ds.d)
        assert ate_matching(ds, fit).point == 0.0

    def test_insufficient_matches(self):
        ds = validate([1.0, 2.0, 3.0], [1.0, 0.0, 0.0])
        fit = PropensityFit.from_scores([0.5, 0.4, 0.6], ds.d)
        with pytest.raises(InsufficientMatchesError):
            ate_matching(ds, fit, n_matches=2)

    def test_n_matches_validated(self):
        ds = validate([1.0, 2.0], [1.0, 0.0])
        fit = PropensityFit.from_scores([0.5, 0.5], ds.d)
        with pytest.raises(ValueError, match="n_matches"):
            ate_matching(ds, fit, n_matches=0)


class TestDoublyRobust:
    def test_augmented_formula_oracle(self):
        # [DERIVED] oracle: m(d,x) from normal equations plus the weighted
        # residual correction, composed independently of the implementation
        ds = confounded_binary(43, 200)
        p1 = expit(2.0 + 0.5 * ds.x[:, 0])
        fit = PropensityFit.from_scores(p1, ds.d)
        est = ate_dr(ds, fit)
        design = np.column_stack([np.ones(ds.n), ds.d, ds.x])
        beta, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
        m1 = np.column_stack([np.ones(ds.n), np.ones(ds.n), ds.x]) @ beta
        m0 = np.column_stack([np.ones(ds.n), np.zeros(ds.n), ds.x]) @ beta
        hi = m1 + ds.d * (ds.y - m1) / p1
        lo = m0 + (1.0 - ds.d) * (ds.y - m0) / (1.0 - p1)
        assert est.point == pytest.approx((hi - lo).mean(), abs=1e-10)

    def test_zero_propensity_raises(self):
        ds = validate([1.0, 2.0, 3.0], [1.0, 0.0, 1.0], [0.1, 0.2, 0.3])
        fit = PropensityFit.from_scores([1e-15, 0.5, 0.6], ds.d)
        with pytest.raises(ZeroPropensityError):
            ate_dr(ds, fit)

    def test_or_ipw_dr_agree_under_randomization(self):
        # [DERIVED] with constant true assignment probability all three
        # estimators target the same contrast
        ds = randomized_binary(44, 10_000)
        fit = estimate_propensity_binary(ds)
        pts = {
            "or": ate_or(ds).point,
            "ipw": ate_ipw(ds, fit).point,
            "dr": ate_dr(ds, fit).point,
        }
        assert abs(pts["or"] - 2.0) < 0.1
        for a in pts.values():
            for b in pts.values():
                assert abs(a - b) < 0.1


class TestPermutationInvariance:
    def test_row_order_never_matters(self):
        ds = confounded_binary(45, 300)
        p1 = expit(2.0 + 0.5 * ds.x[:, 0])
        perm = philox(46).permutation(ds.n)
        ds_p = ds.take(perm)
        fit = PropensityFit.from_scores(p1, ds.d)
        fit_p = PropensityFit.from_scores(p1[perm], ds_p.d)
        pairs = [
            (ate_or(ds).point, ate_or(ds_p).point),
            (ate_ipw(ds, fit).point, ate_ipw(ds_p, fit_p).point),
            (
                ate_psr(ds, fit, poly_degree=2).point,
                ate_psr(ds_p, fit_p, poly_degree=2).point,
            ),
            (
                ate_stratification(ds, fit, 5).point,
                ate_stratification(ds_p, fit_p, 5).point,
            ),
            (ate_matching(ds, fit).point, ate_matching(ds_p, fit_p).point),
            (ate_dr(ds, fit).point, ate_dr(ds_p, fit_p).point),
        ]
        for original, permuted in pairs:
            assert original == pytest.approx(permuted, abs=1e-10)
