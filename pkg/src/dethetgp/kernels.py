"""Squared-exponential kernel and linear mean evaluation shared by all GP layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_NUGGET = 1e-4


@dataclass
class KernelParams:
    """Output scale, per-dimension lengthscales, and diagonal jitter variance.

    The covariance of two points x, x' is

        alpha^2 * prod_i exp(-((x_i - x'_i) / l_i)^2)

    Note the exponent has no factor of 2 in the denominator; the
    lengthscale priors used for fitting assume this exact form on inputs
    scaled to the unit hypercube.
    """

    alpha: float
    lengthscales: np.ndarray
    nugget: float = DEFAULT_NUGGET

    def __post_init__(self):
        self.alpha = float(self.alpha)
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float)).copy()
        self.nugget = float(self.nugget)
        if not np.isfinite(self.alpha) or self.alpha <= 0.0:
            raise ValueError("alpha must be a positive finite scalar")
        if self.lengthscales.ndim != 1 or self.lengthscales.size == 0:
            raise ValueError("lengthscales must be a non-empty vector")
        if not np.all(np.isfinite(self.lengthscales)) or np.any(self.lengthscales <= 0.0):
            raise ValueError("every lengthscale must be positive and finite")
        if not np.isfinite(self.nugget) or self.nugget < 0.0:
            raise ValueError("nugget must be non-negative")

    @property
    def dim(self) -> int:
        return int(self.lengthscales.size)


@dataclass
class LinearMeanParams:
    """Intercept plus per-dimension slope of a linear mean function."""

    intercept: float
    slopes: np.ndarray

    def __post_init__(self):
        self.intercept = float(self.intercept)
        self.slopes = np.atleast_1d(np.asarray(self.slopes, dtype=float)).copy()
        if self.slopes.ndim != 1:
            raise ValueError("slopes must be a vector")
        if not np.isfinite(self.intercept) or not np.all(np.isfinite(self.slopes)):
            raise ValueError("mean parameters must be finite")

    @property
    def dim(self) -> int:
        return int(self.slopes.size)


def _as_points(A, dim: int, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-d point matrix")
    if A.shape[1] != dim:
        raise ValueError(f"{name} has {A.shape[1]} columns, expected {dim}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


def kernel_matrix(params: KernelParams, A, B, add_nugget: bool = False) -> np.ndarray:
    """Cross-covariance matrix between the rows of A (n x d) and B (m x d).

    If `add_nugget` is set, A and B must be the same point set and the
    nugget variance is added to the diagonal.
    """
    d = params.dim
    A = _as_points(A, d, "A")
    B = _as_points(B, d, "B")
    diff = (A[:, None, :] - B[None, :, :]) / params.lengthscales
    K = params.alpha ** 2 * np.exp(-np.einsum("ijk,ijk->ij", diff, diff))
    if add_nugget:
        if A.shape != B.shape or not np.array_equal(A, B):
            raise ValueError("add_nugget requires A and B to be the same points")
        K[np.diag_indices_from(K)] += params.nugget
    return K


def linear_mean(params: LinearMeanParams, A) -> np.ndarray:
    """Evaluate intercept + A @ slopes for each row of A."""
    A = _as_points(A, params.dim, "A")
    return params.intercept + A @ params.slopes
