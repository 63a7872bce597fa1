"""Priors, log-posterior assembly, and MAP optimization shared by all fits.

Every model is fit by maximizing log prior + log likelihood over an
unconstrained reparameterization: log scales for the output scales and
lengthscales, raw coordinates for mean coefficients and latent
log-variances. The objective is the natural-scale posterior density (no
change-of-variables Jacobian is added), so the optimum is the posterior
mode of the parameters as originally stated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf, dpotri, dpotrs
from scipy.optimize import minimize

from .linalg import CholFactor, DecompositionError

_LOG_2PI = math.log(2.0 * math.pi)
_BAD_OBJECTIVE = 1e10


@dataclass(frozen=True)
class PriorSpec:
    """Hyperpriors applied to every GP layer.

    Mean coefficients: Normal(0, beta_sd^2), with beta_sd a standard
    deviation. Output scales: Inverse-Gamma(alpha_shape, alpha_scale) with
    density proportional to a^-(shape+1) exp(-scale/a). Lengthscales (or
    their floored offsets): Gamma(ls_shape, ls_rate) in the shape-rate
    parameterization, so the defaults have prior mean 1 on the unit cube.
    """

    beta_sd: float = 10.0
    alpha_shape: float = 2.0
    alpha_scale: float = 1.0
    ls_shape: float = 4.0
    ls_rate: float = 4.0

    def __post_init__(self):
        for name in ("beta_sd", "alpha_shape", "alpha_scale", "ls_shape", "ls_rate"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class InferenceConfig:
    """Optimizer and model-structure settings shared by all fits."""

    restarts: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-6
    nugget: float = 1e-4
    det_lengthscale_floor: float = 0.05
    variance_plugin: str = "mode"  # "mode" or "lognormal_mean"
    propagate_det_variance: bool = False
    fd_gradient: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.nugget < 0.0:
            raise ValueError("nugget must be non-negative")
        if self.det_lengthscale_floor < 0.0:
            raise ValueError("det_lengthscale_floor must be non-negative")
        if self.variance_plugin not in ("mode", "lognormal_mean"):
            raise ValueError("variance_plugin must be 'mode' or 'lognormal_mean'")


DEFAULT_PRIORS = PriorSpec()
DEFAULT_CONFIG = InferenceConfig()


# ---------------------------------------------------------------------------
# log densities (natural scale)
# ---------------------------------------------------------------------------


def _normal_logpdf_sum(x: np.ndarray, sd: float) -> float:
    x = np.atleast_1d(x)
    return float(-0.5 * x.size * (_LOG_2PI + 2.0 * math.log(sd)) - 0.5 * np.sum((x / sd) ** 2))


def _gamma_logpdf_sum(x: np.ndarray, shape: float, rate: float) -> float:
    x = np.atleast_1d(x)
    if np.any(x <= 0.0):
        return -np.inf
    const = shape * math.log(rate) - math.lgamma(shape)
    return float(x.size * const + (shape - 1.0) * np.sum(np.log(x)) - rate * np.sum(x))


def _invgamma_logpdf_sum(x: np.ndarray, shape: float, scale: float) -> float:
    x = np.atleast_1d(x)
    if np.any(x <= 0.0):
        return -np.inf
    const = shape * math.log(scale) - math.lgamma(shape)
    return float(x.size * const - (shape + 1.0) * np.sum(np.log(x)) - scale * np.sum(1.0 / x))


def log_prior(betas, alphas, lengthscales, spec: PriorSpec = DEFAULT_PRIORS) -> float:
    """Sum of log prior densities for mean coefficients, output scales, lengthscales.

    Returns -inf (rather than raising) when a positivity constraint is
    violated, so the optimizer can reject the point.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    lengthscales = np.atleast_1d(np.asarray(lengthscales, dtype=float))
    total = 0.0
    if betas.size:
        total += _normal_logpdf_sum(betas, spec.beta_sd)
    if alphas.size:
        total += _invgamma_logpdf_sum(alphas, spec.alpha_shape, spec.alpha_scale)
    if lengthscales.size:
        total += _gamma_logpdf_sum(lengthscales, spec.ls_shape, spec.ls_rate)
    return total


def gaussian_loglik(y_target, mean_vec, cov_chol: CholFactor) -> float:
    """Multivariate normal log density of y_target under N(mean_vec, M), via the factor of M."""
    y_target = np.asarray(y_target, dtype=float)
    mean_vec = np.asarray(mean_vec, dtype=float)
    if y_target.shape != mean_vec.shape:
        raise ValueError("y_target and mean_vec must have the same shape")
    r = y_target - mean_vec
    if r.shape[0] != cov_chol.n:
        raise ValueError("residual length does not match the factor")
    solved = cho_solve((cov_chol.lower, True), r)
    quad = float(r @ solved)
    return -0.5 * (quad + cov_chol.log_det + r.shape[0] * _LOG_2PI)


# ---------------------------------------------------------------------------
# One Gaussian layer: value and gradient pieces
# ---------------------------------------------------------------------------


def sq_diffs(X: np.ndarray) -> np.ndarray:
    """Per-dimension squared coordinate differences, shape (d, n, n).

    Computed once per fit; every objective evaluation reuses it, since the
    kernel and all its lengthscale derivatives are elementwise functions
    of these matrices.
    """
    XT = np.asarray(X, dtype=float).T
    diff = XT[:, :, None] - XT[:, None, :]
    return diff * diff


@lru_cache(maxsize=8)
def _sym_weights(n: int) -> np.ndarray:
    # weight of each lower-triangle entry in a sum over the full symmetric matrix
    W = np.tril(np.full((n, n), 2.0), -1) + np.eye(n)
    W.setflags(write=False)
    return W


def _layer_value_and_grads(D: np.ndarray, alpha: float, lengthscales: np.ndarray,
                           diag_add: np.ndarray, resid: np.ndarray):
    """Log density of `resid` under N(0, S) with S = a^2 prod_i exp(-D_i/l_i^2) + diag(diag_add).

    Returns (loglik, solved_resid, g_diag, d_alpha, d_lengthscales) where
    solved_resid = S^-1 resid, g_diag is the diagonal of
    G = (solved_resid solved_resid^T - S^-1)/2, and d_* are the data-term
    gradients with respect to alpha and each lengthscale on the natural
    scale.
    """
    d, n, _ = D.shape
    inv_sq = 1.0 / (lengthscales * lengthscales)
    K = (alpha * alpha) * np.exp(-np.tensordot(inv_sq, D, axes=(0, 0)))
    S = K.copy()
    idx = np.arange(n)
    S[idx, idx] += diag_add
    if not np.all(np.isfinite(S)):
        raise DecompositionError(pivot=0)
    c, info = dpotrf(S, lower=1, clean=0)
    if info != 0:
        raise DecompositionError(pivot=info - 1)
    solved, info = dpotrs(c, resid, lower=1)
    if info != 0:
        raise DecompositionError(pivot=0)
    log_det = 2.0 * float(np.sum(np.log(np.diagonal(c))))
    loglik = -0.5 * (float(resid @ solved) + log_det + n * _LOG_2PI)
    S_inv, info = dpotri(c, lower=1)
    if info != 0:
        raise DecompositionError(pivot=0)
    # S_inv's upper triangle is junk from the factorization; every use below
    # either reads the diagonal or goes through the lower-triangle weights
    G_low = 0.5 * (np.outer(solved, solved) - S_inv)
    g_diag = np.diagonal(G_low).copy()
    GKW = G_low * K
    GKW *= _sym_weights(n)
    d_alpha = (2.0 / alpha) * float(GKW.sum())
    d_ls = np.array(
        [(2.0 / lengthscales[i] ** 3) * float(np.einsum("ij,ij->", GKW, D[i]))
         for i in range(d)]
    )
    return loglik, solved, g_diag, d_alpha, d_ls


def _d_invgamma(x: float, shape: float, scale: float) -> float:
    return -(shape + 1.0) / x + scale / (x * x)


def _d_gamma(x: np.ndarray, shape: float, rate: float) -> np.ndarray:
    return (shape - 1.0) / x - rate


def _d_normal(x: np.ndarray, sd: float) -> np.ndarray:
    return -x / (sd * sd)


# ---------------------------------------------------------------------------
# Objectives and MAP optimization
# ---------------------------------------------------------------------------


@dataclass
class Objective:
    """A log-posterior with gradient over a flat unconstrained parameter vector."""

    value_and_grad: Callable[[np.ndarray], tuple]
    parameter_layout: dict[str, slice]
    sample_init: Callable[[np.random.Generator], np.ndarray]
    n_params: int

    def log_posterior(self, theta: np.ndarray) -> float:
        return self.value_and_grad(np.asarray(theta, dtype=float))[0]

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.value_and_grad(np.asarray(theta, dtype=float))[1]

    def with_fd_gradient(self, step: float = 1e-5) -> "Objective":
        """Same objective with the gradient replaced by central finite differences."""

        def fd_value_and_grad(theta):
            theta = np.asarray(theta, dtype=float)
            return self.value_and_grad(theta)[0], finite_difference_gradient(
                self.log_posterior, theta, step
            )

        return Objective(fd_value_and_grad, self.parameter_layout, self.sample_init,
                         self.n_params)


def finite_difference_gradient(f: Callable[[np.ndarray], float], theta: np.ndarray,
                               step: float = 1e-5) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (f(hi) - f(lo)) / (2.0 * step)
    return grad


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int entropy value or a ready SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


class MapOptimizeError(RuntimeError):
    """Every restart produced a non-finite objective."""


class FitError(RuntimeError):
    """No restart converged; carries the best parameters found anyway."""

    def __init__(self, message: str, best_params: Optional[np.ndarray] = None,
                 best_log_posterior: float = -np.inf):
        super().__init__(message)
        self.best_params = best_params
        self.best_log_posterior = best_log_posterior


@dataclass
class RestartRecord:
    index: int
    log_posterior: float
    converged: bool
    n_iters: int
    message: str
    met_grad_tol: bool = False


@dataclass
class MapResult:
    params: np.ndarray
    log_posterior: float
    restarts: list[RestartRecord] = field(default_factory=list)

    @property
    def n_converged(self) -> int:
        return sum(1 for r in self.restarts if r.converged)


def map_optimize(obj: Objective, restarts: int, seed, tol: float = 1e-6,
                 max_iters: int = 500) -> MapResult:
    """Best-of-restarts quasi-Newton maximization of a log posterior.

    Each restart initializes from `obj.sample_init` with a seed derived
    from (seed, restart index) and runs L-BFGS-B until the projected
    gradient norm falls below `tol` or the iteration cap is hit; either
    counts as a normal termination. A restart is marked non-converged
    only when it ends abnormally (line-search failure or a non-finite
    objective). Ties between restarts break toward the lower restart
    index.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    streams = as_seed_sequence(seed).spawn(restarts)

    def neg(theta):
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                value, grad = obj.value_and_grad(theta)
        except DecompositionError:
            return _BAD_OBJECTIVE, np.zeros_like(theta)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            return _BAD_OBJECTIVE, np.zeros_like(theta)
        return -value, -grad

    records = []
    best_params = None
    best_value = -np.inf
    for k, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        x0 = np.asarray(obj.sample_init(rng), dtype=float)
        res = minimize(
            neg, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": max_iters, "gtol": tol, "maxcor": 50},
        )
        value = -float(res.fun)
        finite = value > -0.5 * _BAD_OBJECTIVE
        grad_norm = float(np.max(np.abs(res.jac))) if res.jac is not None else np.inf
        hit_cap = int(res.nit) >= max_iters
        converged = finite and (bool(res.success) or grad_norm <= tol or hit_cap)
        records.append(RestartRecord(k, value, converged, int(res.nit),
                                     str(res.message), met_grad_tol=grad_norm <= tol))
        if finite and value > best_value:
            best_params = np.asarray(res.x, dtype=float).copy()
            best_value = value
    if best_params is None:
        raise MapOptimizeError("every restart produced a non-finite objective")
    return MapResult(params=best_params, log_posterior=best_value, restarts=records)


def run_map_fit(obj: Objective, cfg: InferenceConfig, seed) -> MapResult:
    """map_optimize with the config's restart budget.

    Raises FitError (carrying the best parameters found) when every
    restart terminated abnormally.
    """
    if cfg.fd_gradient:
        obj = obj.with_fd_gradient()
    result = map_optimize(obj, restarts=cfg.restarts, seed=seed, tol=cfg.grad_tol,
                          max_iters=cfg.max_iters)
    if result.n_converged == 0:
        raise FitError(
            f"all {cfg.restarts} restarts terminated abnormally",
            best_params=result.params,
            best_log_posterior=result.log_posterior,
        )
    return result


def sample_hyper_inits(rng: np.random.Generator, d: int, spec: PriorSpec):
    """Draw (intercept, slopes, alpha, lengthscales) from their priors."""
    intercept = spec.beta_sd * rng.standard_normal()
    slopes = spec.beta_sd * rng.standard_normal(d)
    alpha = spec.alpha_scale / rng.gamma(spec.alpha_shape, 1.0)
    lengthscales = rng.gamma(spec.ls_shape, 1.0 / spec.ls_rate, size=d)
    return intercept, slopes, alpha, lengthscales


def make_layout(*parts: tuple) -> dict[str, slice]:
    """Named slices over a flat parameter vector from (name, size) pairs."""
    layout = {}
    offset = 0
    for name, size in parts:
        layout[name] = slice(offset, offset + size)
        offset += size
    return layout
