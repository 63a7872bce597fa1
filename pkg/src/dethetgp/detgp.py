"""GP emulator for runs of a deterministic approximation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .inference import (
    DEFAULT_CONFIG,
    DEFAULT_PRIORS,
    InferenceConfig,
    Objective,
    PriorSpec,
    _d_gamma,
    _d_invgamma,
    _d_normal,
    _gamma_logpdf_sum,
    _invgamma_logpdf_sum,
    _layer_value_and_grads,
    _normal_logpdf_sum,
    make_layout,
    run_map_fit,
    sample_hyper_inits,
    sq_diffs,
)
from .kernels import KernelParams, LinearMeanParams, kernel_matrix, linear_mean
from .linalg import CholFactor, chol_solve, cholesky
from .predictive import PredictiveDistribution


def _validate_unit_inputs(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be an n x d matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError(f"{name} must be pre-scaled to the unit hypercube [0, 1]^d")
    return X


def _has_duplicate_rows(X: np.ndarray) -> bool:
    return np.unique(X, axis=0).shape[0] < X.shape[0]


@dataclass
class DetGPModel:
    """Frozen data, MAP parameters, and cached factor for the deterministic layer."""

    X_det: np.ndarray
    y_det: np.ndarray
    mean: LinearMeanParams
    kernel: KernelParams
    chol: CholFactor
    alpha_vec: np.ndarray

    @classmethod
    def build(cls, X_det, y_det, mean: LinearMeanParams, kernel: KernelParams) -> "DetGPModel":
        """Assemble a model from explicit parameters, recomputing the caches."""
        X_det = _validate_unit_inputs(X_det, "X_det")
        y_det = np.asarray(y_det, dtype=float)
        if y_det.shape != (X_det.shape[0],):
            raise ValueError("y_det must be a vector matching the rows of X_det")
        cov = kernel_matrix(kernel, X_det, X_det, add_nugget=True)
        chol = cholesky(cov)
        alpha_vec = chol_solve(chol, y_det - linear_mean(mean, X_det))
        return cls(X_det=X_det, y_det=y_det, mean=mean, kernel=kernel, chol=chol,
                   alpha_vec=alpha_vec)

    @property
    def dim(self) -> int:
        return self.X_det.shape[1]

    def predict(self, Xstar) -> PredictiveDistribution:
        return predict_detgp(self, Xstar)

    def to_dict(self) -> dict:
        return {
            "x": self.X_det.tolist(),
            "y": self.y_det.tolist(),
            "mean": {"intercept": self.mean.intercept, "slopes": self.mean.slopes.tolist()},
            "kernel": {
                "alpha": self.kernel.alpha,
                "lengthscales": self.kernel.lengthscales.tolist(),
                "nugget": self.kernel.nugget,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DetGPModel":
        return cls.build(
            np.asarray(payload["x"], dtype=float),
            np.asarray(payload["y"], dtype=float),
            LinearMeanParams(payload["mean"]["intercept"], payload["mean"]["slopes"]),
            KernelParams(
                payload["kernel"]["alpha"],
                payload["kernel"]["lengthscales"],
                payload["kernel"]["nugget"],
            ),
        )


def build_detgp_objective(X_det, y_det, priors: PriorSpec = DEFAULT_PRIORS,
                          lengthscale_floor: float = 0.0,
                          nugget: float = DEFAULT_CONFIG.nugget) -> Objective:
    """Log posterior of the deterministic layer over a flat parameter vector.

    Layout: intercept, slopes (d), log alpha, log lengthscale offsets (d).
    Lengthscales are `floor + exp(t)`, and the Gamma prior applies to the
    positive offset, so a zero floor recovers the plain parameterization.
    """
    X_det = _validate_unit_inputs(X_det, "X_det")
    y_det = np.asarray(y_det, dtype=float)
    n, d = X_det.shape
    D = sq_diffs(X_det)
    nugget_vec = np.full(n, nugget)
    layout = make_layout(("intercept", 1), ("slopes", d), ("log_alpha", 1),
                         ("log_ls_offset", d))
    n_params = 2 + 2 * d

    def value_and_grad(theta):
        theta = np.asarray(theta, dtype=float)
        b0 = theta[layout["intercept"]][0]
        b = theta[layout["slopes"]]
        alpha = float(np.exp(theta[layout["log_alpha"]][0]))
        ls_offset = np.exp(theta[layout["log_ls_offset"]])
        ls = lengthscale_floor + ls_offset
        # exp under/overflow puts a positive parameter on its support
        # boundary, where the posterior is -inf; report that instead of
        # evaluating gradients there
        if (not 0.0 < alpha < np.inf
                or not np.all((ls_offset > 0.0) & np.isfinite(ls_offset))):
            return -np.inf, np.zeros(n_params)

        resid = y_det - (b0 + X_det @ b)
        loglik, solved, _, d_alpha, d_ls = _layer_value_and_grads(
            D, alpha, ls, nugget_vec, resid
        )
        value = (
            loglik
            + _normal_logpdf_sum(np.concatenate(([b0], b)), priors.beta_sd)
            + _invgamma_logpdf_sum(alpha, priors.alpha_shape, priors.alpha_scale)
            + _gamma_logpdf_sum(ls_offset, priors.ls_shape, priors.ls_rate)
        )
        grad = np.empty(n_params)
        grad[layout["intercept"]] = solved.sum() + _d_normal(b0, priors.beta_sd)
        grad[layout["slopes"]] = X_det.T @ solved + _d_normal(b, priors.beta_sd)
        grad[layout["log_alpha"]] = (
            d_alpha + _d_invgamma(alpha, priors.alpha_shape, priors.alpha_scale)
        ) * alpha
        grad[layout["log_ls_offset"]] = (
            d_ls + _d_gamma(ls_offset, priors.ls_shape, priors.ls_rate)
        ) * ls_offset
        return value, grad

    def sample_init(rng):
        b0, b, alpha, ls_offset = sample_hyper_inits(rng, d, priors)
        return np.concatenate(([b0], b, [np.log(alpha)], np.log(ls_offset)))

    return Objective(value_and_grad, layout, sample_init, n_params)


def fit_detgp(X_det, y_det, priors: PriorSpec = DEFAULT_PRIORS,
              constrain_lengthscale: bool = False, seed=0,
              settings: InferenceConfig = DEFAULT_CONFIG) -> DetGPModel:
    """MAP fit of the deterministic-layer GP.

    With `constrain_lengthscale` the lengthscales are kept above
    `settings.det_lengthscale_floor`, the parameterization used when this
    layer sits inside the composite emulator; standalone fits leave them
    unconstrained.

    Parameters
    ----------
    X_det : (n, d) inputs in [0, 1]^d
    y_det : (n,) deterministic outputs, standardized by the caller
    priors : hyperprior settings
    constrain_lengthscale : apply the lengthscale floor
    seed : restart seed
    settings : optimizer and nugget configuration
    """
    X_det = _validate_unit_inputs(X_det, "X_det")
    y_det = np.asarray(y_det, dtype=float)
    if X_det.shape[0] < 2:
        raise ValueError("need at least 2 deterministic runs")
    if y_det.shape != (X_det.shape[0],):
        raise ValueError("y_det must be a vector matching the rows of X_det")
    if _has_duplicate_rows(X_det):
        raise ValueError("X_det contains duplicate rows; a deterministic code "
                         "returns identical outputs there and the fit is singular")
    floor = settings.det_lengthscale_floor if constrain_lengthscale else 0.0
    obj = build_detgp_objective(X_det, y_det, priors, lengthscale_floor=floor,
                                nugget=settings.nugget)
    result = run_map_fit(obj, settings, seed)
    layout = obj.parameter_layout
    theta = result.params
    mean = LinearMeanParams(theta[layout["intercept"]][0], theta[layout["slopes"]])
    kernel = KernelParams(
        alpha=float(np.exp(theta[layout["log_alpha"]][0])),
        lengthscales=floor + np.exp(theta[layout["log_ls_offset"]]),
        nugget=settings.nugget,
    )
    return DetGPModel.build(X_det, y_det, mean, kernel)


def predict_detgp(model: DetGPModel, Xstar) -> PredictiveDistribution:
    """Gaussian prediction conditional on the deterministic runs.

    The nugget is part of the inverted training covariance but is not
    added to the predictive variance, which is clamped below at zero.
    """
    Xstar = _validate_unit_inputs(Xstar, "Xstar")
    if Xstar.shape[1] != model.dim:
        raise ValueError(f"Xstar has {Xstar.shape[1]} columns, expected {model.dim}")
    K_cross = kernel_matrix(model.kernel, Xstar, model.X_det)
    mean = linear_mean(model.mean, Xstar) + K_cross @ model.alpha_vec
    w = solve_triangular(model.chol.lower, K_cross.T, lower=True)
    var = model.kernel.alpha ** 2 - np.einsum("ij,ij->j", w, w)
    return PredictiveDistribution(mean=mean, var=np.maximum(var, 0.0))
