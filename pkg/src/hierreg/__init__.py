"""Hierarchical Bayesian linear regression: variational and Gibbs inference.

Per-group weight vectors share a population-level Gaussian prior whose
per-dimension precisions implement automatic relevance determination.
The coordinate-ascent engine maximizes the evidence lower bound in closed
form; the Gibbs sampler targets the exact posterior of the same model and
serves as the reference; predictions are Student-t.
"""

from .baselines import OlsFit, ols_fit, ols_table_csv, ridge_fit
from .cavi import (
    FitReport,
    compute_elbo,
    fit,
    initial_state,
    update_beta,
    update_delta,
    update_s,
    update_sigma,
    update_w,
)
from .dataio import (
    CvReport,
    TabularFile,
    build_grouped_dataset,
    build_turkiye_dataset,
    cv_table_csv,
    kfold_split,
    load_csv,
    rounded_mse,
    run_cv,
    write_dataset_csv,
)
from .gibbs import GibbsConfig, GibbsRun, gibbs_run, summarize, summary_csv
from .model import (
    Group,
    GroupedDataset,
    Hyperparameters,
    VariationalPosterior,
    default_hyperparameters,
    hyperparameters_from_json,
    hyperparameters_to_json,
    posterior_from_json,
    posterior_to_json,
    validate,
)
from .predictive import (
    StudentTPrediction,
    predict_known_group,
    predict_new_group,
    predictive_interval,
)
from .ranking import rank_features, rank_groups, ranking_csv
from .specialmath import (
    RngStream,
    SpdFactor,
    digamma,
    ln_gamma,
    rng_stream,
    spd_factorize,
    student_t_cdf,
    student_t_quantile,
)
from .synthetic import SyntheticTruth, synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "Group",
    "GroupedDataset",
    "Hyperparameters",
    "VariationalPosterior",
    "validate",
    "default_hyperparameters",
    "hyperparameters_to_json",
    "hyperparameters_from_json",
    "posterior_to_json",
    "posterior_from_json",
    "FitReport",
    "fit",
    "initial_state",
    "update_beta",
    "update_delta",
    "update_sigma",
    "update_s",
    "update_w",
    "compute_elbo",
    "GibbsConfig",
    "GibbsRun",
    "gibbs_run",
    "summarize",
    "summary_csv",
    "StudentTPrediction",
    "predict_known_group",
    "predict_new_group",
    "predictive_interval",
    "OlsFit",
    "ols_fit",
    "ridge_fit",
    "ols_table_csv",
    "TabularFile",
    "CvReport",
    "load_csv",
    "build_grouped_dataset",
    "build_turkiye_dataset",
    "write_dataset_csv",
    "kfold_split",
    "rounded_mse",
    "run_cv",
    "cv_table_csv",
    "rank_features",
    "rank_groups",
    "ranking_csv",
    "digamma",
    "ln_gamma",
    "SpdFactor",
    "spd_factorize",
    "student_t_cdf",
    "student_t_quantile",
    "RngStream",
    "rng_stream",
    "SyntheticTruth",
    "synthetic_dataset",
]
