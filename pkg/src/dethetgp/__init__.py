"""Emulation of stochastic simulators with a deterministic-approximation GP layer.

The package provides three emulators over inputs scaled to [0,1]^d:

- DetGP: a GP fit to runs of a deterministic approximation of a simulator.
- HetGP: a heteroscedastic GP whose log noise variance is itself a GP.
- DetHetGP: their sum; the heteroscedastic layer adjusts the
  deterministic layer toward the stochastic simulator's mean while
  modelling its intrinsic variance.

`harness` reproduces the comparison experiments (designs, standardization,
replication, metrics), and `cli` exposes them as the `dethetgp` command.
"""

__version__ = "0.1.0"

from .design import Design, maximin_lhs, min_pairwise_distance
from .dethetgp import DetHetGPModel, fit_dethetgp, predict_dethetgp
from .detgp import DetGPModel, fit_detgp, predict_detgp
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    Standardizer,
    cross_section,
    run_experiment,
    run_replication,
)
from .hetgp import HetGPModel, fit_hetgp, noise_variance_at, predict_hetgp, predict_variance
from .inference import (
    InferenceConfig,
    MapOptimizeError,
    FitError,
    Objective,
    PriorSpec,
    gaussian_loglik,
    log_prior,
    map_optimize,
)
from .kernels import KernelParams, LinearMeanParams, kernel_matrix, linear_mean
from .linalg import CholFactor, DecompositionError, chol_solve, cholesky
from .metrics import MetricTriple, empirical_mse, score, true_mse
from .persistence import load_model, save_model
from .predictive import PredictiveDistribution
from .simulators import (
    SimOutput,
    Simulator,
    SirParams,
    TrueMoments,
    get_simulator,
    sir_dcm,
    sir_icm,
    toy1,
    toy1_det,
    toy_binois,
    toy_binois_det,
    toy_goldberg2d,
    toy_goldberg2d_det,
)

__all__ = [
    "__version__",
    "CholFactor", "DecompositionError", "cholesky", "chol_solve",
    "KernelParams", "LinearMeanParams", "kernel_matrix", "linear_mean",
    "Design", "maximin_lhs", "min_pairwise_distance",
    "SimOutput", "Simulator", "SirParams", "TrueMoments", "get_simulator",
    "toy1", "toy1_det", "toy_goldberg2d", "toy_goldberg2d_det",
    "toy_binois", "toy_binois_det", "sir_icm", "sir_dcm",
    "PriorSpec", "InferenceConfig", "Objective", "log_prior",
    "gaussian_loglik", "map_optimize", "MapOptimizeError", "FitError",
    "DetGPModel", "fit_detgp", "predict_detgp",
    "HetGPModel", "fit_hetgp", "predict_hetgp", "predict_variance", "noise_variance_at",
    "DetHetGPModel", "fit_dethetgp", "predict_dethetgp",
    "MetricTriple", "true_mse", "empirical_mse", "score",
    "ExperimentConfig", "ExperimentResult", "Standardizer",
    "run_experiment", "run_replication", "cross_section",
    "PredictiveDistribution",
    "save_model", "load_model",
]
