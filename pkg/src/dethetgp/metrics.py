"""Evaluation metrics: true MSE, held-out MSE, and the Gaussian predictive score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class MetricTriple:
    """One method's metrics for one replication.

    `true_mse` is None when the simulator has no analytic mean.
    """

    true_mse: Optional[float]
    mse: float
    score: float

    def __post_init__(self):
        if self.mse < 0.0:
            raise ValueError("mse must be non-negative")
        if self.true_mse is not None and self.true_mse < 0.0:
            raise ValueError("true_mse must be non-negative")


def true_mse(pred_means, true_means) -> float:
    """Mean squared difference between predictive means and the true means."""
    pred_means = np.asarray(pred_means, dtype=float)
    true_means = np.asarray(true_means, dtype=float)
    if pred_means.shape != true_means.shape:
        raise ValueError("pred_means and true_means must have equal length")
    return float(np.mean((pred_means - true_means) ** 2))


def empirical_mse(pred_means, sim_draws) -> float:
    """Mean squared deviation of held-out simulator draws from the predictive means.

    `sim_draws` has one row per repeat draw and one column per test point.
    """
    pred_means = np.asarray(pred_means, dtype=float)
    sim_draws = np.atleast_2d(np.asarray(sim_draws, dtype=float))
    if sim_draws.shape[1] != pred_means.shape[0]:
        raise ValueError("sim_draws columns must match pred_means length")
    return float(np.mean((sim_draws - pred_means) ** 2))


def score(pred_means, pred_vars, sim_draws) -> float:
    """Total Gaussian predictive score over all (draw, point) pairs.

    Each pair contributes -((y - mu)/sigma)^2 - log(sigma^2); the pairs
    are summed, not averaged, and higher is better.
    """
    pred_means = np.asarray(pred_means, dtype=float)
    pred_vars = np.asarray(pred_vars, dtype=float)
    if pred_means.shape != pred_vars.shape:
        raise ValueError("pred_means and pred_vars must have equal length")
    if np.any(pred_vars <= 0.0):
        raise ValueError("pred_vars must be strictly positive")
    sim_draws = np.atleast_2d(np.asarray(sim_draws, dtype=float))
    if sim_draws.shape[1] != pred_means.shape[0]:
        raise ValueError("sim_draws columns must match pred_means length")
    z_sq = (sim_draws - pred_means) ** 2 / pred_vars
    return float(-np.sum(z_sq) - sim_draws.shape[0] * np.sum(np.log(pred_vars)))
