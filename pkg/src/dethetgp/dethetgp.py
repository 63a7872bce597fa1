"""Composite emulator: deterministic-layer GP plus residual heteroscedastic GP.

The stochastic simulator is modelled as the sum of two independent GPs: a
deterministic layer fit to runs of the deterministic approximation, and a
heteroscedastic adjustment layer fit to the stochastic outputs minus the
deterministic layer's posterior mean. Predictions add the two layers'
means and variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detgp import DetGPModel, _validate_unit_inputs, fit_detgp, predict_detgp
from .hetgp import HetGPModel, fit_hetgp, predict_hetgp
from .inference import (
    DEFAULT_CONFIG,
    DEFAULT_PRIORS,
    InferenceConfig,
    PriorSpec,
    as_seed_sequence,
)
from .predictive import PredictiveDistribution


@dataclass
class DetHetGPModel:
    """Fitted deterministic layer, fitted residual layer, and the residual targets."""

    det: DetGPModel
    het: HetGPModel
    residual_targets: np.ndarray

    @property
    def dim(self) -> int:
        return self.het.dim

    def predict(self, Xstar) -> PredictiveDistribution:
        return predict_dethetgp(self, Xstar)

    def to_dict(self) -> dict:
        return {
            "det": self.det.to_dict(),
            "het": self.het.to_dict(),
            "residual_targets": self.residual_targets.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DetHetGPModel":
        return cls(
            det=DetGPModel.from_dict(payload["det"]),
            het=HetGPModel.from_dict(payload["het"]),
            residual_targets=np.asarray(payload["residual_targets"], dtype=float),
        )


def fit_dethetgp(X, y, X_det, y_det, priors: PriorSpec = DEFAULT_PRIORS, seed=0,
                 settings: InferenceConfig = DEFAULT_CONFIG,
                 constrain_det_lengthscale: bool = True) -> DetHetGPModel:
    """Two-stage MAP fit of the composite emulator.

    Stage one fits the deterministic layer to (X_det, y_det), by default
    with its lengthscales floored at `settings.det_lengthscale_floor` to
    prevent the near-zero-lengthscale collapse that otherwise turns the
    layer into spikes around its data. Stage two subtracts that layer's
    posterior mean from y and fits the heteroscedastic layer to the
    residuals. The two stages are estimated separately; the deterministic
    layer's predictive variance re-enters only in prediction (or, when
    `settings.propagate_det_variance` is set, as known extra noise on the
    residual layer's diagonal).

    Both y and y_det must be standardized with the same standardizer.
    """
    X = _validate_unit_inputs(X, "X")
    X_det = _validate_unit_inputs(X_det, "X_det")
    if X.shape[1] != X_det.shape[1]:
        raise ValueError("X and X_det must share the same input dimension")
    y = np.asarray(y, dtype=float)
    seeds = as_seed_sequence(seed).spawn(2)
    det = fit_detgp(X_det, y_det, priors, constrain_lengthscale=constrain_det_lengthscale,
                    seed=seeds[0], settings=settings)
    det_at_x = predict_detgp(det, X)
    residual_targets = y - det_at_x.mean
    extra = det_at_x.var if settings.propagate_det_variance else None
    het = fit_hetgp(X, residual_targets, priors, seed=seeds[1], settings=settings,
                    extra_noise_var=extra)
    return DetHetGPModel(det=det, het=het, residual_targets=residual_targets)


def predict_dethetgp(model: DetHetGPModel, Xstar) -> PredictiveDistribution:
    """Sum of the two layers' predictions, treated as independent Gaussians.

    The layer means and variances are retained on the result so the
    deterministic component can be plotted on its own.
    """
    det = predict_detgp(model.det, Xstar)
    het = predict_hetgp(model.het, Xstar)
    return PredictiveDistribution(
        mean=det.mean + het.mean,
        var=det.var + het.var,
        det_mean=det.mean,
        det_var=det.var,
        het_mean=het.mean,
        het_var=het.var,
    )
