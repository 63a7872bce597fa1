"""Command-line entry points: experiment, fit, predict, crosssection.

All commands are config-driven and fully seeded; the CLI only wires files
to library calls and never computes anything itself. The DETHETGP_LOG
environment variable (DEBUG/INFO/WARNING/ERROR) controls log verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .design import maximin_lhs
from .dethetgp import fit_dethetgp
from .detgp import fit_detgp
from .harness import (
    ExperimentConfig,
    Standardizer,
    cross_section,
    run_experiment,
    write_cross_section_csv,
    write_replications_csv,
    write_summary_json,
)
from .hetgp import fit_hetgp
from .inference import InferenceConfig, PriorSpec
from .persistence import load_model, save_model
from .simulators import get_simulator

logger = logging.getLogger("dethetgp")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _setup_logging():
    level = os.environ.get("DETHETGP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return payload


def _take(payload: dict, key: str, expected_type, where: str, default=None,
          required: bool = False):
    if key not in payload:
        if required:
            raise ConfigError(f"missing required key '{where}{key}'")
        return default
    value = payload.pop(key)
    if expected_type is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, expected_type) or isinstance(value, bool) and expected_type is not bool:
        raise ConfigError(
            f"key '{where}{key}' must be {getattr(expected_type, '__name__', expected_type)}"
        )
    return value


def _reject_unknown(payload: dict, where: str):
    if payload:
        key = sorted(payload)[0]
        raise ConfigError(f"unknown key '{where}{key}'")


def parse_inference_block(payload: dict, where: str = "inference.") -> tuple[PriorSpec, InferenceConfig]:
    payload = dict(payload)
    priors = PriorSpec(beta_sd=_take(payload, "beta_prior_sd", float, where, default=10.0))
    cfg = InferenceConfig(
        restarts=_take(payload, "restarts", int, where, default=10),
        max_iters=_take(payload, "max_iters", int, where, default=500),
        grad_tol=_take(payload, "grad_tol", float, where, default=1e-6),
        nugget=_take(payload, "nugget", float, where, default=1e-4),
        det_lengthscale_floor=_take(payload, "det_lengthscale_floor", float, where,
                                    default=0.05),
        variance_plugin=_take(payload, "variance_plugin", str, where, default="mode"),
        propagate_det_variance=_take(payload, "propagate_det_variance", bool, where,
                                     default=False),
        fd_gradient=_take(payload, "fd_gradient", bool, where, default=False),
    )
    _reject_unknown(payload, where)
    return priors, cfg


def parse_experiment_config(payload: dict, seed_override=None,
                            workers_override=None) -> ExperimentConfig:
    payload = dict(payload)
    priors, inference = parse_inference_block(payload.pop("inference", {}))
    seed = _take(payload, "seed", int, "", default=0)
    workers = _take(payload, "workers", int, "", default=1)
    try:
        cfg = ExperimentConfig(
            simulator_id=_take(payload, "simulator_id", str, "", required=True),
            n_total=_take(payload, "n_total", int, "", required=True),
            n_det=_take(payload, "n_det", int, "", required=True),
            n_test=_take(payload, "n_test", int, "", default=100),
            r_test=_take(payload, "r_test", int, "", default=1000),
            replications=_take(payload, "replications", int, "", default=100),
            seed=seed_override if seed_override is not None else seed,
            d=_take(payload, "d", int, ""),
            standardization=_take(payload, "standardization", str, "",
                                  default="stochastic_fit_set"),
            n_candidates=_take(payload, "n_candidates", int, "", default=1000),
            workers=workers_override if workers_override is not None else workers,
            priors=priors,
            inference=inference,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _reject_unknown(payload, "")
    return cfg


def _config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out_dir: Path, resolved_config: dict, started: str,
                    output_paths: list) -> None:
    manifest = {
        "config_hash": _config_hash(resolved_config),
        "tool_version": __version__,
        "started": started,
        "finished": _utc_now(),
        "output_paths": [str(p) for p in output_paths],
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_experiment(args) -> int:
    started = _utc_now()
    cfg = parse_experiment_config(_load_json(args.config), seed_override=args.seed,
                                  workers_override=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("running %d replications of %s (n_total=%d, n_det=%d)",
                cfg.replications, cfg.simulator_id, cfg.n_total, cfg.n_det)
    result = run_experiment(cfg)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.json"
    write_replications_csv(result, results_path)
    write_summary_json(result, summary_path)
    _write_manifest(out_dir, cfg.to_dict(), started, [results_path, summary_path])
    logger.info("wrote %s and %s", results_path, summary_path)
    return 0


def _load_points_csv(path, expected_dim=None) -> np.ndarray:
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise ConfigError(f"cannot read points file {path}: {exc}") from exc
    except ValueError:
        # retry skipping a header row
        try:
            X = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1, comments="#")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"points file {path} is not numeric CSV: {exc}") from exc
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ConfigError(
            f"points file {path} has {X.shape[1]} columns, model expects {expected_dim}"
        )
    return X


def _load_vector_csv(path) -> np.ndarray:
    return _load_points_csv(path).reshape(-1)


def _simulated_fit_data(block: dict, need_stochastic: bool, need_det: bool) -> dict:
    where = "data.simulate."
    block = dict(block)
    sim = get_simulator(_take(block, "simulator_id", str, where, required=True))
    n = _take(block, "n", int, where, default=0)
    n_det = _take(block, "n_det", int, where, default=0)
    seed = _take(block, "seed", int, where, default=0)
    n_candidates = _take(block, "n_candidates", int, where, default=1000)
    _reject_unknown(block, where)
    if need_stochastic and n < 1:
        raise ConfigError(f"key '{where}n' must be positive for this model")
    if need_det and n_det < 1:
        raise ConfigError(f"key '{where}n_det' must be positive for this model")
    streams = np.random.SeedSequence(seed).spawn(3)
    data: dict = {}
    if need_stochastic:
        X = maximin_lhs(n, sim.dim, int(streams[0].generate_state(1)[0]),
                        n_candidates).points
        rng = np.random.default_rng(streams[1])
        data["x"], data["y"] = X, sim.sample(X, rng)
    if need_det:
        X_det = maximin_lhs(n_det, sim.dim, int(streams[2].generate_state(1)[0]),
                            n_candidates).points
        data["x_det"], data["y_det"] = X_det, sim.run_deterministic(X_det)
    return data


def _csv_fit_data(block: dict, need_stochastic: bool, need_det: bool) -> dict:
    where = "data.csv."
    block = dict(block)
    data: dict = {}
    if need_stochastic:
        data["x"] = _load_points_csv(_take(block, "x", str, where, required=True))
        data["y"] = _load_vector_csv(_take(block, "y", str, where, required=True))
    else:
        block.pop("x", None), block.pop("y", None)
    if need_det:
        data["x_det"] = _load_points_csv(_take(block, "x_det", str, where, required=True))
        data["y_det"] = _load_vector_csv(_take(block, "y_det", str, where, required=True))
    else:
        block.pop("x_det", None), block.pop("y_det", None)
    _reject_unknown(block, where)
    return data


def cmd_fit(args) -> int:
    payload = _load_json(args.config)
    kind = _take(payload, "model", str, "", required=True)
    if kind not in ("detgp", "hetgp", "dethetgp"):
        raise ConfigError("key 'model' must be one of detgp, hetgp, dethetgp")
    seed = args.seed if args.seed is not None else _take(payload, "seed", int, "", default=0)
    out_name = _take(payload, "out", str, "", default="model.json")
    standardize = _take(payload, "standardize", bool, "", default=True)
    constrain = _take(payload, "constrain_lengthscale", bool, "", default=False)
    priors, settings = parse_inference_block(payload.pop("inference", {}))
    data_block = _take(payload, "data", dict, "", required=True)
    _reject_unknown(payload, "")

    need_stochastic = kind in ("hetgp", "dethetgp")
    need_det = kind in ("detgp", "dethetgp")
    data_block = dict(data_block)
    if "simulate" in data_block:
        data = _simulated_fit_data(_take(data_block, "simulate", dict, "data."),
                                   need_stochastic, need_det)
    elif "csv" in data_block:
        data = _csv_fit_data(_take(data_block, "csv", dict, "data."),
                             need_stochastic, need_det)
    else:
        raise ConfigError("key 'data' must contain either 'simulate' or 'csv'")
    _reject_unknown(data_block, "data.")

    std = None
    if standardize:
        basis = data["y"] if need_stochastic else data["y_det"]
        source = "stochastic fit data" if need_stochastic else "deterministic fit data"
        std = Standardizer.from_data(basis, source=source)

    def z(values):
        return values if std is None else std.apply(values)

    if kind == "detgp":
        model = fit_detgp(data["x_det"], z(data["y_det"]), priors,
                          constrain_lengthscale=constrain, seed=seed, settings=settings)
    elif kind == "hetgp":
        model = fit_hetgp(data["x"], z(data["y"]), priors, seed=seed, settings=settings)
    else:
        model = fit_dethetgp(data["x"], z(data["y"]), data["x_det"], z(data["y_det"]),
                             priors, seed=seed, settings=settings)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / out_name
    save_model(out_path, model, std)
    logger.info("wrote %s", out_path)
    print(out_path)
    return 0


def cmd_predict(args) -> int:
    model, std = load_model(args.model)
    X = _load_points_csv(args.points, expected_dim=model.dim)
    pred = model.predict(X)
    mean, var = pred.mean, pred.var
    if std is not None:
        mean, var = std.invert(mean), std.invert_var(var)
    out_path = Path(args.out)
    with open(out_path, "w") as fh:
        cols = [f"x{i + 1}" for i in range(X.shape[1])] + ["mean", "variance"]
        fh.write(",".join(cols) + "\n")
        for row, m, v in zip(X, mean, var):
            fh.write(",".join(repr(float(val)) for val in row) +
                     f",{float(m)!r},{float(v)!r}\n")
    logger.info("wrote %s", out_path)
    return 0


def _parse_fixed(items) -> dict:
    fixed = {}
    for item in items or []:
        try:
            k, v = item.split("=", 1)
            fixed[int(k)] = float(v)
        except ValueError:
            raise ConfigError(f"--fixed entries must look like DIM=VALUE, got {item!r}")
    return fixed


def cmd_crosssection(args) -> int:
    model, std = load_model(args.model)
    table = cross_section(model, _parse_fixed(args.fixed), axis=args.axis,
                          grid=args.grid, standardizer=std)
    write_cross_section_csv(table, args.out)
    logger.info("wrote %s", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dethetgp",
        description="Stochastic-simulator emulation with a deterministic-approximation GP layer",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run a replicated emulator comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fit", help="fit a model and persist it as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict at points from a CSV file")
    p.add_argument("model", help="persisted model JSON")
    p.add_argument("points", help="CSV of points in [0,1]^d")
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("crosssection", help="1-d slice of the prediction surface")
    p.add_argument("model", help="persisted model JSON")
    p.add_argument("--axis", type=int, required=True)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--fixed", action="append", metavar="DIM=VALUE",
                   help="fixed value for one non-axis dimension (repeatable)")
    p.add_argument("--out", default="crosssection.csv")
    p.set_defaults(func=cmd_crosssection)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
