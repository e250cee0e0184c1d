"""causalest: causal effect estimation and simulation benchmarks.

Estimators for observational data (outcome regression, assignment-score
weighting, regression, stratification and matching, and the augmented
doubly robust combination), linear panel models, instrumental variables,
difference-in-differences, synthetic control, and regression discontinuity,
plus a seeded Monte Carlo harness with golden-file reference checks.
"""

from . import errors
from .core import (
    BINARY,
    CONTINUOUS,
    MULTIVALUED,
    CausalEstimate,
    ObservationalDataset,
    PanelDataset,
    difference_in_means,
    validate,
    validate_panel,
)
from .estimators import (
    OrSpec,
    apo_ipw,
    apo_or,
    ate_dr,
    ate_ipw,
    ate_matching,
    ate_or,
    ate_psr,
    ate_stratification,
    fit_outcome_model,
)
from .panel import (
    CRE,
    FD,
    FE,
    POLS,
    RE,
    PanelSpec,
    fit_cre,
    fit_fd,
    fit_fe,
    fit_panel,
    fit_pols,
    fit_re,
)
from .propensity import (
    BalanceTable,
    PropensityFit,
    balance_diagnostic,
    estimate_gps_normal,
    estimate_propensity_binary,
    estimate_propensity_multivalued,
    quantile_strata,
    trim_overlap,
)
from .quasi import (
    DidDataset,
    ScFit,
    ScProblem,
    ate_2sls,
    ate_did,
    ate_did_covariates,
    ate_did_multiperiod,
    iv_ratio,
    rdd_fuzzy,
    rdd_sharp,
    sc_fit,
    sc_weights,
    validate_did,
)
from .regress import (
    IDENTITY,
    LOGIT,
    LinearFit,
    fit_logistic,
    fit_ols,
    logistic_loglik,
    logistic_score,
    predict,
)
from .simulate import (
    CASE_IDS,
    CASE_METHODS,
    TRUE_TAU,
    CellCheck,
    DgpSpec,
    MonteCarloReport,
    compare_to_reference,
    generate,
    load_reference,
    load_tolerances,
    misspecified_scores,
    read_reference_csv,
    run_monte_carlo,
)
from .variance import (
    BootstrapResult,
    bootstrap_variance,
    delta_variance,
    delta_variance_or,
    normal_interval,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "BINARY",
    "MULTIVALUED",
    "CONTINUOUS",
    "ObservationalDataset",
    "PanelDataset",
    "CausalEstimate",
    "validate",
    "validate_panel",
    "difference_in_means",
    "IDENTITY",
    "LOGIT",
    "LinearFit",
    "fit_ols",
    "fit_logistic",
    "logistic_loglik",
    "logistic_score",
    "predict",
    "PropensityFit",
    "estimate_propensity_binary",
    "estimate_propensity_multivalued",
    "estimate_gps_normal",
    "trim_overlap",
    "quantile_strata",
    "BalanceTable",
    "balance_diagnostic",
    "OrSpec",
    "fit_outcome_model",
    "apo_or",
    "ate_or",
    "apo_ipw",
    "ate_ipw",
    "ate_psr",
    "ate_stratification",
    "ate_matching",
    "ate_dr",
    "PanelSpec",
    "fit_panel",
    "fit_pols",
    "fit_re",
    "fit_fe",
    "fit_fd",
    "fit_cre",
    "POLS",
    "RE",
    "FE",
    "FD",
    "CRE",
    "iv_ratio",
    "ate_2sls",
    "DidDataset",
    "validate_did",
    "ate_did",
    "ate_did_covariates",
    "ate_did_multiperiod",
    "ScProblem",
    "ScFit",
    "sc_weights",
    "sc_fit",
    "rdd_sharp",
    "rdd_fuzzy",
    "delta_variance",
    "delta_variance_or",
    "normal_interval",
    "BootstrapResult",
    "bootstrap_variance",
    "DgpSpec",
    "generate",
    "misspecified_scores",
    "run_monte_carlo",
    "MonteCarloReport",
    "compare_to_reference",
    "CellCheck",
    "load_reference",
    "load_tolerances",
    "read_reference_csv",
    "CASE_IDS",
    "CASE_METHODS",
    "TRUE_TAU",
    "__version__",
]
