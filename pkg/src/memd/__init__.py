"""Generative maximum-entropy classification with divergence-based ranking."""

__version__ = "0.1.0"

from .classifier import (  # noqa: F401
    ModelConfig,
    NaiveBayesModel,
    binary_decision_lambda_form,
    fit,
    load_model,
    log_posterior,
    predict,
    save_model,
)
from .divergence import (  # noqa: F401
    j_divergence,
    js_divergence_discrete,
    js_gm,
    kl_closed_form,
    kl_numeric,
    mutual_information_discrete,
)
from .harness import ExperimentConfig, cross_validate, kfold_split  # noqa: F401
from .maxent import (  # noqa: F401
    FeatureFunctionSpec,
    MaxEntDensity,
    MomentVector,
    SupportSpec,
    empirical_moments,
    fit_exponential_halfline,
    fit_gaussian_realline,
    fit_numeric,
    log_density,
)
from .selection import (  # noqa: F401
    MarginalGrid,
    RankedFeatures,
    brute_force_subset_oracle,
    score_binary_j,
    score_js_gm,
    score_one_vs_all_j,
)
