"""Heteroscedastic GP emulator with a latent log-variance GP.

The model has two layers: a GP over the outputs whose independent noise
variance varies by input, and a second GP over the log of that noise
variance. The per-point log-variances are explicit latent variables,
optimized jointly with both layers' hyperparameters in one MAP objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

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
from .detgp import _validate_unit_inputs
from .kernels import KernelParams, LinearMeanParams, kernel_matrix, linear_mean
from .linalg import CholFactor, chol_solve, cholesky
from .predictive import PredictiveDistribution

VAR_FLOOR = 1e-12
_MIN_LATENT_VAR = 1e-10


@dataclass
class HetGPModel:
    """Frozen data, MAP parameters, latent log-variances, and cached factors.

    `y_target` holds the raw standardized outputs when the model is used
    as a standalone emulator, or residual targets when it is the
    adjustment layer of the composite model. `extra_noise_var` is an
    optional known per-point variance added to the output layer's
    diagonal (used when deterministic-layer uncertainty is propagated).
    """

    X: np.ndarray
    y_target: np.ndarray
    mean: LinearMeanParams
    kernel: KernelParams
    var_mean: LinearMeanParams
    var_kernel: KernelParams
    lam: np.ndarray
    chol_main: CholFactor
    chol_var: CholFactor
    alpha_vec_main: np.ndarray
    alpha_vec_var: np.ndarray
    variance_plugin: str = "mode"
    extra_noise_var: Optional[np.ndarray] = None

    @classmethod
    def build(cls, X, y_target, mean: LinearMeanParams, kernel: KernelParams,
              var_mean: LinearMeanParams, var_kernel: KernelParams, lam,
              variance_plugin: str = "mode",
              extra_noise_var: Optional[np.ndarray] = None) -> "HetGPModel":
        """Assemble a model from explicit parameters, recomputing the caches."""
        X = _validate_unit_inputs(X, "X")
        y_target = np.asarray(y_target, dtype=float)
        lam = np.asarray(lam, dtype=float)
        n = X.shape[0]
        if y_target.shape != (n,) or lam.shape != (n,):
            raise ValueError("y_target and lam must be vectors matching the rows of X")
        if not np.all(np.isfinite(np.exp(lam))):
            raise ValueError("exp(lam) must be finite")
        noise = np.exp(lam)
        if extra_noise_var is not None:
            extra_noise_var = np.asarray(extra_noise_var, dtype=float)
            if extra_noise_var.shape != (n,):
                raise ValueError("extra_noise_var must be a vector matching X")
            noise = noise + extra_noise_var
        cov_main = kernel_matrix(kernel, X, X, add_nugget=True)
        cov_main[np.diag_indices_from(cov_main)] += noise
        chol_main = cholesky(cov_main)
        chol_var = cholesky(kernel_matrix(var_kernel, X, X, add_nugget=True))
        return cls(
            X=X, y_target=y_target, mean=mean, kernel=kernel,
            var_mean=var_mean, var_kernel=var_kernel, lam=lam,
            chol_main=chol_main, chol_var=chol_var,
            alpha_vec_main=chol_solve(chol_main, y_target - linear_mean(mean, X)),
            alpha_vec_var=chol_solve(chol_var, lam - linear_mean(var_mean, X)),
            variance_plugin=variance_plugin,
            extra_noise_var=extra_noise_var,
        )

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, Xstar) -> PredictiveDistribution:
        return predict_hetgp(self, Xstar)

    def to_dict(self) -> dict:
        return {
            "x": self.X.tolist(),
            "y": self.y_target.tolist(),
            "mean": {"intercept": self.mean.intercept, "slopes": self.mean.slopes.tolist()},
            "kernel": {
                "alpha": self.kernel.alpha,
                "lengthscales": self.kernel.lengthscales.tolist(),
                "nugget": self.kernel.nugget,
            },
            "var_mean": {
                "intercept": self.var_mean.intercept,
                "slopes": self.var_mean.slopes.tolist(),
            },
            "var_kernel": {
                "alpha": self.var_kernel.alpha,
                "lengthscales": self.var_kernel.lengthscales.tolist(),
                "nugget": self.var_kernel.nugget,
            },
            "lambda": self.lam.tolist(),
            "variance_plugin": self.variance_plugin,
            "extra_noise_var": (
                None if self.extra_noise_var is None else self.extra_noise_var.tolist()
            ),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "HetGPModel":
        extra = payload.get("extra_noise_var")
        return cls.build(
            np.asarray(payload["x"], dtype=float),
            np.asarray(payload["y"], dtype=float),
            LinearMeanParams(payload["mean"]["intercept"], payload["mean"]["slopes"]),
            KernelParams(
                payload["kernel"]["alpha"],
                payload["kernel"]["lengthscales"],
                payload["kernel"]["nugget"],
            ),
            LinearMeanParams(payload["var_mean"]["intercept"], payload["var_mean"]["slopes"]),
            KernelParams(
                payload["var_kernel"]["alpha"],
                payload["var_kernel"]["lengthscales"],
                payload["var_kernel"]["nugget"],
            ),
            np.asarray(payload["lambda"], dtype=float),
            variance_plugin=payload.get("variance_plugin", "mode"),
            extra_noise_var=None if extra is None else np.asarray(extra, dtype=float),
        )


def build_hetgp_objective(X, y_target, priors: PriorSpec = DEFAULT_PRIORS,
                          nugget: float = DEFAULT_CONFIG.nugget,
                          extra_noise_var: Optional[np.ndarray] = None) -> Objective:
    """Joint MAP objective over both layers' parameters and the latent log-variances.

    The value is the Gaussian data likelihood with per-point noise
    exp(lam_j), plus the GP prior on lam under the variance layer, plus
    the hyperpriors on all mean/kernel parameters. Layout: intercept,
    slopes (d), log alpha, log lengthscales (d), the same four blocks for
    the variance layer, then lam (n).
    """
    X = _validate_unit_inputs(X, "X")
    y_target = np.asarray(y_target, dtype=float)
    n, d = X.shape
    D = sq_diffs(X)
    nugget_vec = np.full(n, nugget)
    extra = np.zeros(n) if extra_noise_var is None else np.asarray(extra_noise_var, dtype=float)
    layout = make_layout(
        ("intercept", 1), ("slopes", d), ("log_alpha", 1), ("log_ls", d),
        ("var_intercept", 1), ("var_slopes", d), ("var_log_alpha", 1), ("var_log_ls", d),
        ("lam", n),
    )
    n_params = 2 * (2 + 2 * d) + n
    lam_init = float(np.log(max(np.var(y_target), _MIN_LATENT_VAR)))

    def value_and_grad(theta):
        theta = np.asarray(theta, dtype=float)
        b0 = theta[layout["intercept"]][0]
        b = theta[layout["slopes"]]
        alpha = float(np.exp(theta[layout["log_alpha"]][0]))
        ls = np.exp(theta[layout["log_ls"]])
        vb0 = theta[layout["var_intercept"]][0]
        vb = theta[layout["var_slopes"]]
        valpha = float(np.exp(theta[layout["var_log_alpha"]][0]))
        vls = np.exp(theta[layout["var_log_ls"]])
        lam = theta[layout["lam"]]

        noise = np.exp(lam)
        # exp under/overflow puts a positive parameter on its support
        # boundary, where the posterior is -inf; report that instead of
        # evaluating gradients there
        scales_ok = (
            0.0 < alpha < np.inf and 0.0 < valpha < np.inf
            and np.all((ls > 0.0) & np.isfinite(ls))
            and np.all((vls > 0.0) & np.isfinite(vls))
            and np.all(np.isfinite(noise))
        )
        if not scales_ok:
            return -np.inf, np.zeros(n_params)
        resid = y_target - (b0 + X @ b)
        ll_main, solved_main, g_diag_main, d_alpha, d_ls = _layer_value_and_grads(
            D, alpha, ls, noise + nugget_vec + extra, resid
        )
        lam_resid = lam - (vb0 + X @ vb)
        ll_var, solved_var, _, d_valpha, d_vls = _layer_value_and_grads(
            D, valpha, vls, nugget_vec, lam_resid
        )
        value = (
            ll_main
            + ll_var
            + _normal_logpdf_sum(np.concatenate(([b0], b, [vb0], vb)), priors.beta_sd)
            + _invgamma_logpdf_sum(np.array([alpha, valpha]), priors.alpha_shape,
                                   priors.alpha_scale)
            + _gamma_logpdf_sum(np.concatenate((ls, vls)), priors.ls_shape, priors.ls_rate)
        )
        grad = np.empty(n_params)
        grad[layout["intercept"]] = solved_main.sum() + _d_normal(b0, priors.beta_sd)
        grad[layout["slopes"]] = X.T @ solved_main + _d_normal(b, priors.beta_sd)
        grad[layout["log_alpha"]] = (
            d_alpha + _d_invgamma(alpha, priors.alpha_shape, priors.alpha_scale)
        ) * alpha
        grad[layout["log_ls"]] = (d_ls + _d_gamma(ls, priors.ls_shape, priors.ls_rate)) * ls
        grad[layout["var_intercept"]] = solved_var.sum() + _d_normal(vb0, priors.beta_sd)
        grad[layout["var_slopes"]] = X.T @ solved_var + _d_normal(vb, priors.beta_sd)
        grad[layout["var_log_alpha"]] = (
            d_valpha + _d_invgamma(valpha, priors.alpha_shape, priors.alpha_scale)
        ) * valpha
        grad[layout["var_log_ls"]] = (
            d_vls + _d_gamma(vls, priors.ls_shape, priors.ls_rate)
        ) * vls
        grad[layout["lam"]] = g_diag_main * noise - solved_var
        return value, grad

    def sample_init(rng):
        b0, b, alpha, ls = sample_hyper_inits(rng, d, priors)
        vb0, vb, valpha, vls = sample_hyper_inits(rng, d, priors)
        return np.concatenate((
            [b0], b, [np.log(alpha)], np.log(ls),
            [vb0], vb, [np.log(valpha)], np.log(vls),
            np.full(n, lam_init),
        ))

    return Objective(value_and_grad, layout, sample_init, n_params)


def fit_hetgp(X, y_target, priors: PriorSpec = DEFAULT_PRIORS, seed=0,
              settings: InferenceConfig = DEFAULT_CONFIG,
              extra_noise_var: Optional[np.ndarray] = None) -> HetGPModel:
    """Joint MAP fit of the output layer, variance layer, and latent log-variances.

    Parameters
    ----------
    X : (n, d) inputs in [0, 1]^d, n >= 5
    y_target : (n,) standardized outputs, or residuals on the standardized scale
    priors : hyperprior settings
    seed : restart seed
    settings : optimizer and nugget configuration
    extra_noise_var : optional known per-point variance added to the
        output layer's diagonal
    """
    X = _validate_unit_inputs(X, "X")
    y_target = np.asarray(y_target, dtype=float)
    if X.shape[0] < 5:
        raise ValueError("need at least 5 points to fit the heteroscedastic model")
    if y_target.shape != (X.shape[0],):
        raise ValueError("y_target must be a vector matching the rows of X")
    obj = build_hetgp_objective(X, y_target, priors, nugget=settings.nugget,
                                extra_noise_var=extra_noise_var)
    result = run_map_fit(obj, settings, seed)
    layout = obj.parameter_layout
    theta = result.params
    mean = LinearMeanParams(theta[layout["intercept"]][0], theta[layout["slopes"]])
    kernel = KernelParams(float(np.exp(theta[layout["log_alpha"]][0])),
                          np.exp(theta[layout["log_ls"]]), settings.nugget)
    var_mean = LinearMeanParams(theta[layout["var_intercept"]][0],
                                theta[layout["var_slopes"]])
    var_kernel = KernelParams(float(np.exp(theta[layout["var_log_alpha"]][0])),
                              np.exp(theta[layout["var_log_ls"]]), settings.nugget)
    return HetGPModel.build(X, y_target, mean, kernel, var_mean, var_kernel,
                            theta[layout["lam"]],
                            variance_plugin=settings.variance_plugin,
                            extra_noise_var=extra_noise_var)


def predict_variance(model: HetGPModel, Xstar) -> PredictiveDistribution:
    """Gaussian prediction of the latent log noise variance at new points."""
    Xstar = _validate_unit_inputs(Xstar, "Xstar")
    if Xstar.shape[1] != model.dim:
        raise ValueError(f"Xstar has {Xstar.shape[1]} columns, expected {model.dim}")
    K_cross = kernel_matrix(model.var_kernel, Xstar, model.X)
    mean = linear_mean(model.var_mean, Xstar) + K_cross @ model.alpha_vec_var
    w = solve_triangular(model.chol_var.lower, K_cross.T, lower=True)
    var = model.var_kernel.alpha ** 2 - np.einsum("ij,ij->j", w, w)
    return PredictiveDistribution(mean=mean, var=np.maximum(var, 0.0))


def noise_variance_at(model: HetGPModel, Xstar) -> np.ndarray:
    """Point estimate of the intrinsic noise variance at new points.

    The default plug-in exponentiates the predictive mean of the log
    variance; `variance_plugin="lognormal_mean"` instead uses the
    lognormal mean exp(mu + v/2).
    """
    log_var = predict_variance(model, Xstar)
    if model.variance_plugin == "lognormal_mean":
        return np.exp(log_var.mean + 0.5 * log_var.var)
    return np.exp(log_var.mean)


def predict_hetgp(model: HetGPModel, Xstar) -> PredictiveDistribution:
    """Heteroscedastic Gaussian prediction at new points.

    The predictive variance includes the intrinsic noise estimate at the
    new points and is floored at 1e-12 so downstream scoring can always
    take a log.
    """
    Xstar = _validate_unit_inputs(Xstar, "Xstar")
    if Xstar.shape[1] != model.dim:
        raise ValueError(f"Xstar has {Xstar.shape[1]} columns, expected {model.dim}")
    delta_sq = noise_variance_at(model, Xstar)
    K_cross = kernel_matrix(model.kernel, Xstar, model.X)
    mean = linear_mean(model.mean, Xstar) + K_cross @ model.alpha_vec_main
    w = solve_triangular(model.chol_main.lower, K_cross.T, lower=True)
    var = model.kernel.alpha ** 2 + delta_sq - np.einsum("ij,ij->j", w, w)
    return PredictiveDistribution(mean=mean, var=np.maximum(var, VAR_FLOOR))
