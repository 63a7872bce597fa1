"""Positive-definite linear algebra via Cholesky factor-and-solve.

Explicit matrix inversion is deliberately not offered: every solve goes
through a cached factor, which is what keeps the small-nugget systems
used by the emulators numerically well behaved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

_SYMMETRY_TOL = 1e-10


class DecompositionError(np.linalg.LinAlgError):
    """Cholesky failure on a matrix that should have been positive definite.

    Carries the 0-based index of the failing pivot; a failure here usually
    signals a nugget or lengthscale pathology upstream.
    """

    def __init__(self, pivot: int):
        self.pivot = int(pivot)
        super().__init__(
            f"matrix is not positive definite: Cholesky pivot {self.pivot} failed"
        )


@dataclass
class CholFactor:
    """Lower-triangular Cholesky factor with its cached log-determinant."""

    lower: np.ndarray
    log_det: float

    @property
    def n(self) -> int:
        return self.lower.shape[0]


def cholesky(M) -> CholFactor:
    """Factor a symmetric positive-definite matrix as L L^T.

    Raises DecompositionError naming the failing pivot when M is not
    positive definite, and ValueError when M is not symmetric to 1e-10.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("M contains non-finite values")
    scale = max(1.0, float(np.max(np.abs(M))))
    if float(np.max(np.abs(M - M.T))) > _SYMMETRY_TOL * scale:
        raise ValueError("M is not symmetric within 1e-10")
    c, info = dpotrf(M, lower=1, clean=1)
    if info != 0:
        raise DecompositionError(pivot=info - 1)
    lower = np.tril(c)
    log_det = 2.0 * float(np.sum(np.log(np.diagonal(lower))))
    return CholFactor(lower=lower, log_det=log_det)


def chol_solve(F: CholFactor, B):
    """Solve M x = B through the factor of M, for vector or matrix B."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.n:
        raise ValueError(f"B has leading dimension {B.shape[0]}, expected {F.n}")
    return cho_solve((F.lower, True), B)
