"""Explicit normal-approximation bounds for trait averages on Yule trees.

The package computes Stein-type upper and lower bounds on the Kolmogorov and
Wasserstein distances between the average of an Ornstein-Uhlenbeck trait over
the tips of a random Yule tree (with or without speciation jumps) and its
matching normal, and cross-checks them against exact per-tree Monte Carlo.
"""

from .analytic import (
    MODEL_YOU,
    MODEL_YOUJ,
    AsymptoticConstants,
    JumpSchedule,
    LimitDistribution,
    Regime,
    UnsupportedRegimeError,
    YouParams,
    asymptotic_constants,
    bound_curve,
    bound_point,
    classify_regime,
    is_nonconvergent,
    laplace_height,
    laplace_height_variance,
    laplace_pair_time,
    limit_distribution,
    mean_ybar,
    var_cond_mean_exact,
    var_cond_var_you_asymptotic,
    var_cond_var_youj_upper,
    var_ybar_you,
    var_ybar_youj,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    MomentEstimates,
    OracleCheck,
    SandwichReport,
    dkw_band,
    empirical_dk,
    empirical_dw,
    estimate_moment_summary,
    oracle_checks,
    run_experiment,
    run_replicates,
    run_sandwich,
)
from .stein import (
    KOLMOGOROV,
    WASSERSTEIN,
    BoundReport,
    LowerBoundInputs,
    MomentSummary,
    kolmogorov_two_normals,
    kolmogorov_upper,
    lower_bound_constant,
    stein_lower_bound,
    variance_penalty,
    wasserstein_two_normals,
    wasserstein_upper,
)
from .trees import (
    ConditionalMoments,
    JumpRealization,
    YuleTree,
    conditional_moments_you,
    conditional_moments_youj,
    dump_tree,
    pair_mean_exp,
    sample_jumps,
    sample_tree,
    sample_ybar,
)

__version__ = "0.1.0"

__all__ = [
    "MODEL_YOU",
    "MODEL_YOUJ",
    "KOLMOGOROV",
    "WASSERSTEIN",
    "AsymptoticConstants",
    "BoundReport",
    "ConditionalMoments",
    "ExperimentConfig",
    "ExperimentResult",
    "JumpRealization",
    "JumpSchedule",
    "LimitDistribution",
    "LowerBoundInputs",
    "MomentEstimates",
    "MomentSummary",
    "OracleCheck",
    "Regime",
    "SandwichReport",
    "UnsupportedRegimeError",
    "YouParams",
    "YuleTree",
    "asymptotic_constants",
    "bound_curve",
    "bound_point",
    "classify_regime",
    "conditional_moments_you",
    "conditional_moments_youj",
    "dkw_band",
    "dump_tree",
    "empirical_dk",
    "empirical_dw",
    "estimate_moment_summary",
    "is_nonconvergent",
    "kolmogorov_two_normals",
    "kolmogorov_upper",
    "laplace_height",
    "laplace_height_variance",
    "laplace_pair_time",
    "limit_distribution",
    "lower_bound_constant",
    "mean_ybar",
    "oracle_checks",
    "pair_mean_exp",
    "run_experiment",
    "run_replicates",
    "run_sandwich",
    "sample_jumps",
    "sample_tree",
    "sample_ybar",
    "stein_lower_bound",
    "var_cond_mean_exact",
    "var_cond_var_you_asymptotic",
    "var_cond_var_youj_upper",
    "var_ybar_you",
    "var_ybar_youj",
    "variance_penalty",
    "wasserstein_two_normals",
    "wasserstein_upper",
    "__version__",
]
