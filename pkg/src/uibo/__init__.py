"""Bayesian optimisation with uncertain inputs.

GP surrogates over Gaussian-distributed locations, distance-penalised
acquisition, and a terrain-roughness exploration simulator.
"""

from .gp import (
    Dataset,
    GaussianInput,
    GpPosterior,
    HyperBounds,
    Hyperparams,
    IllConditionedDataError,
    NumericError,
    fit_hyperparameters,
    fit_posterior,
    gram_matrix,
    kernel_se,
    kernel_uise,
    log_marginal_likelihood,
    predict,
    predict_many,
)
from .config import ConfigError, RunConfig, default_config, load_config
from .driver import (
    BenchmarkResult,
    MethodSpec,
    SimSetup,
    TrialRecord,
    run_benchmark,
    run_episode,
)
from .estimator import UncertainInputGPRegressor
from .replay import ReplayDataError, ReplayResult, run_replay

__all__ = [
    "BenchmarkResult",
    "ConfigError",
    "Dataset",
    "GaussianInput",
    "GpPosterior",
    "HyperBounds",
    "Hyperparams",
    "IllConditionedDataError",
    "MethodSpec",
    "NumericError",
    "ReplayDataError",
    "ReplayResult",
    "RunConfig",
    "SimSetup",
    "TrialRecord",
    "UncertainInputGPRegressor",
    "default_config",
    "fit_hyperparameters",
    "fit_posterior",
    "gram_matrix",
    "kernel_se",
    "kernel_uise",
    "load_config",
    "log_marginal_likelihood",
    "predict",
    "predict_many",
    "run_benchmark",
    "run_episode",
    "run_replay",
]

__version__ = "0.1.0"
