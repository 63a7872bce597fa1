"""Per-point Gaussian predictive distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class PredictiveDistribution:
    """Pointwise predictive mean and variance.

    For the composite emulator the deterministic-layer and residual-layer
    contributions are kept alongside the totals so they can be plotted
    separately.
    """

    mean: np.ndarray
    var: np.ndarray
    det_mean: Optional[np.ndarray] = None
    det_var: Optional[np.ndarray] = None
    het_mean: Optional[np.ndarray] = None
    het_var: Optional[np.ndarray] = None

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.var = np.atleast_1d(np.asarray(self.var, dtype=float))
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and var must have the same shape")

    def __len__(self) -> int:
        return self.mean.shape[0]
