"""JSON persistence for fitted models.

A persisted file is a single JSON object:

    {
      "format": "dethetgp-model",
      "version": "<package version>",
      "kind": "detgp" | "hetgp" | "dethetgp",
      "model": { ... },          # parameters and training data
      "standardizer": { ... }    # optional output transform, or null
    }

The "model" payloads store training inputs/targets plus the fitted mean
and kernel parameters ("x", "y", "mean" {intercept, slopes}, "kernel"
{alpha, lengthscales, nugget}); the heteroscedastic kind adds "var_mean",
"var_kernel", "lambda", "variance_plugin", and "extra_noise_var"; the
composite kind nests "det" and "het" payloads plus "residual_targets".
Cached factors are recomputed on load, so a round trip reproduces
predictions exactly.
"""

from __future__ import annotations

import json
from typing import Optional, Union

from . import __version__
from .dethetgp import DetHetGPModel
from .detgp import DetGPModel
from .harness import Standardizer
from .hetgp import HetGPModel

FORMAT_NAME = "dethetgp-model"

AnyModel = Union[DetGPModel, HetGPModel, DetHetGPModel]

_KINDS = {
    DetGPModel: "detgp",
    HetGPModel: "hetgp",
    DetHetGPModel: "dethetgp",
}
_LOADERS = {
    "detgp": DetGPModel.from_dict,
    "hetgp": HetGPModel.from_dict,
    "dethetgp": DetHetGPModel.from_dict,
}


def model_kind(model: AnyModel) -> str:
    try:
        return _KINDS[type(model)]
    except KeyError:
        raise TypeError(f"not a persistable model: {type(model).__name__}") from None


def save_model(path, model: AnyModel, standardizer: Optional[Standardizer] = None) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": __version__,
        "kind": model_kind(model),
        "model": model.to_dict(),
        "standardizer": None if standardizer is None else standardizer.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[AnyModel, Optional[Standardizer]]:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise ValueError(f"{path} is not a persisted model file")
    kind = payload.get("kind")
    if kind not in _LOADERS:
        raise ValueError(f"unknown model kind {kind!r} in {path}")
    model = _LOADERS[kind](payload["model"])
    std = payload.get("standardizer")
    return model, None if std is None else Standardizer.from_dict(std)
