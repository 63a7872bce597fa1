"""Replication engine for the emulator comparison experiments.

One replication draws fresh designs, runs the simulators, standardizes
every dataset with one shared standardizer, fits the baseline
heteroscedastic emulator and the composite emulator, and scores both on a
shared held-out test set. Replications are independent and fully
determined by (config, replication index).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

import numpy as np

from .design import DEFAULT_CANDIDATES, maximin_lhs
from .dethetgp import fit_dethetgp, predict_dethetgp
from .hetgp import fit_hetgp, predict_hetgp
from .inference import FitError, InferenceConfig, MapOptimizeError, PriorSpec
from .linalg import DecompositionError
from .metrics import MetricTriple, empirical_mse, score, true_mse
from .simulators import Simulator, get_simulator

METHOD_HETGP = "hetgp"
METHOD_DETHETGP = "dethetgp"
STANDARDIZATION_MODES = ("stochastic_fit_set", "shared_subset")
QUANTILE_METHOD = "linear"
_Z95 = 1.959963984540054


@dataclass
class Standardizer:
    """Affine output transform fixed from a designated stochastic training set."""

    y_mean: float
    y_sd: float
    source: str

    def __post_init__(self):
        if not self.y_sd > 0.0:
            raise ValueError("y_sd must be positive")

    @classmethod
    def from_data(cls, y, source: str) -> "Standardizer":
        y = np.asarray(y, dtype=float)
        sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
        return cls(y_mean=float(np.mean(y)), y_sd=sd, source=source)

    def apply(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_sd

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.y_sd + self.y_mean

    def apply_sd(self, sd):
        return np.asarray(sd, dtype=float) / self.y_sd

    def invert_var(self, var_z):
        return np.asarray(var_z, dtype=float) * self.y_sd ** 2

    def to_dict(self) -> dict:
        return {"y_mean": self.y_mean, "y_sd": self.y_sd, "source": self.source}

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardizer":
        return cls(payload["y_mean"], payload["y_sd"], payload.get("source", ""))


@dataclass
class ExperimentConfig:
    """Protocol settings for one comparison experiment."""

    simulator_id: str
    n_total: int
    n_det: int
    n_test: int = 100
    r_test: int = 1000
    replications: int = 100
    seed: int = 0
    d: Optional[int] = None
    standardization: str = "stochastic_fit_set"
    n_candidates: int = DEFAULT_CANDIDATES
    workers: int = 1
    priors: PriorSpec = field(default_factory=PriorSpec)
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def __post_init__(self):
        sim = get_simulator(self.simulator_id)
        if self.d is None:
            self.d = sim.dim
        elif self.d != sim.dim:
            raise ValueError(
                f"d={self.d} does not match simulator {self.simulator_id!r} (d={sim.dim})"
            )
        if self.n_total < 1:
            raise ValueError("n_total must be at least 1")
        if not 0 <= self.n_det < self.n_total:
            raise ValueError("n_det must satisfy 0 <= n_det < n_total")
        for name in ("n_test", "r_test", "replications", "workers", "n_candidates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.standardization not in STANDARDIZATION_MODES:
            raise ValueError(
                f"standardization must be one of {STANDARDIZATION_MODES}"
            )

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["priors"] = asdict(self.priors)
        payload["inference"] = asdict(self.inference)
        return payload


@dataclass
class ReplicationRecord:
    rep: int
    method: str
    triple: Optional[MetricTriple]
    fit_status: str


@dataclass
class ExperimentResult:
    """Per-replication metrics and their quartile summaries."""

    config: ExperimentConfig
    records: list[ReplicationRecord]
    summary: dict
    n_failed: dict
    quantile_method: str = QUANTILE_METHOD


def _stream_seed(stream: np.random.SeedSequence) -> int:
    return int(stream.generate_state(1)[0])


def _replication_streams(cfg: ExperimentConfig, rep_index: int):
    base = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(rep_index,))
    names = ("design_hetgp", "design_stoch", "design_det", "train_draws",
             "test_design", "test_draws", "fit_hetgp", "fit_dethetgp")
    return dict(zip(names, base.spawn(len(names))))


def _replication_data(cfg: ExperimentConfig, sim: Simulator, rep_index: int):
    """Designs, runs, standardizer, and test data for one replication."""
    streams = _replication_streams(cfg, rep_index)
    n_stoch = cfg.n_total - cfg.n_det
    train_rng = np.random.default_rng(streams["train_draws"])

    if cfg.n_det > 0:
        X_stoch = maximin_lhs(n_stoch, cfg.d, _stream_seed(streams["design_stoch"]),
                              cfg.n_candidates).points
        X_det = maximin_lhs(cfg.n_det, cfg.d, _stream_seed(streams["design_det"]),
                            cfg.n_candidates).points
    else:
        X_stoch, X_det = None, None

    if cfg.standardization == "shared_subset" and cfg.n_det > 0:
        # budget-matched comparison: the baseline reuses the composite arm's
        # stochastic points plus stochastic runs at the deterministic coordinates
        y_stoch = sim.sample(X_stoch, train_rng)
        y_at_det = sim.sample(X_det, train_rng)
        X_hetgp = np.vstack([X_stoch, X_det])
        y_hetgp = np.concatenate([y_stoch, y_at_det])
        standardizer = Standardizer.from_data(
            y_stoch, source=f"{n_stoch} shared stochastic fit points, rep {rep_index}"
        )
    else:
        X_hetgp = maximin_lhs(cfg.n_total, cfg.d, _stream_seed(streams["design_hetgp"]),
                              cfg.n_candidates).points
        y_hetgp = sim.sample(X_hetgp, train_rng)
        y_stoch = sim.sample(X_stoch, train_rng) if cfg.n_det > 0 else None
        standardizer = Standardizer.from_data(
            y_hetgp, source=f"{cfg.n_total} stochastic fit points, rep {rep_index}"
        )

    y_det = sim.run_deterministic(X_det) if cfg.n_det > 0 else None

    X_test = maximin_lhs(cfg.n_test, cfg.d, _stream_seed(streams["test_design"]),
                         cfg.n_candidates).points
    test_rng = np.random.default_rng(streams["test_draws"])
    test_draws = np.stack([sim.sample(X_test, test_rng) for _ in range(cfg.r_test)])

    return {
        "X_hetgp": X_hetgp, "y_hetgp": y_hetgp,
        "X_stoch": X_stoch, "y_stoch": y_stoch,
        "X_det": X_det, "y_det": y_det,
        "X_test": X_test, "test_draws": test_draws,
        "standardizer": standardizer,
        "fit_seed_hetgp": _stream_seed(streams["fit_hetgp"]),
        "fit_seed_dethetgp": _stream_seed(streams["fit_dethetgp"]),
    }


def _metrics_for(pred, z_draws, z_true) -> MetricTriple:
    return MetricTriple(
        true_mse=None if z_true is None else true_mse(pred.mean, z_true),
        mse=empirical_mse(pred.mean, z_draws),
        score=score(pred.mean, pred.var, z_draws),
    )


_FIT_ERRORS = (FitError, MapOptimizeError, DecompositionError, np.linalg.LinAlgError,
               ValueError)


def run_replication(cfg: ExperimentConfig, rep_index: int) -> dict:
    """Fit and score both methods on one replication's data.

    Returns a mapping from method name to ReplicationRecord. Fit failures
    are captured in the record's fit_status rather than raised, so a long
    experiment is never lost to one bad replication.
    """
    sim = get_simulator(cfg.simulator_id)
    data = _replication_data(cfg, sim, rep_index)
    std = data["standardizer"]

    z_draws = std.apply(data["test_draws"])
    z_true = std.apply(sim.true_mean(data["X_test"])) if sim.has_true_moments else None

    outcomes: dict[str, ReplicationRecord] = {}

    try:
        hetgp = fit_hetgp(data["X_hetgp"], std.apply(data["y_hetgp"]), cfg.priors,
                          seed=data["fit_seed_hetgp"], settings=cfg.inference)
        pred = predict_hetgp(hetgp, data["X_test"])
        outcomes[METHOD_HETGP] = ReplicationRecord(
            rep_index, METHOD_HETGP, _metrics_for(pred, z_draws, z_true), "ok"
        )
    except _FIT_ERRORS as exc:
        outcomes[METHOD_HETGP] = ReplicationRecord(
            rep_index, METHOD_HETGP, None, f"error: {exc}"
        )

    if cfg.n_det > 0:
        try:
            dethet = fit_dethetgp(
                data["X_stoch"], std.apply(data["y_stoch"]),
                data["X_det"], std.apply(data["y_det"]),
                cfg.priors, seed=data["fit_seed_dethetgp"], settings=cfg.inference,
            )
            pred = predict_dethetgp(dethet, data["X_test"])
            outcomes[METHOD_DETHETGP] = ReplicationRecord(
                rep_index, METHOD_DETHETGP, _metrics_for(pred, z_draws, z_true), "ok"
            )
        except _FIT_ERRORS as exc:
            outcomes[METHOD_DETHETGP] = ReplicationRecord(
                rep_index, METHOD_DETHETGP, None, f"error: {exc}"
            )

    return outcomes


def _replication_worker(args):
    cfg, rep_index = args
    return rep_index, run_replication(cfg, rep_index)


def _summarize(records: list[ReplicationRecord]) -> tuple[dict, dict]:
    methods = sorted({r.method for r in records})
    summary: dict = {}
    n_failed: dict = {}
    for method in methods:
        ok = [r.triple for r in records if r.method == method and r.triple is not None]
        n_failed[method] = sum(
            1 for r in records if r.method == method and r.triple is None
        )
        summary[method] = {}
        for metric in ("true_mse", "mse", "score"):
            values = [getattr(t, metric) for t in ok]
            values = [v for v in values if v is not None]
            if not values:
                summary[method][metric] = None
                continue
            lq, med, uq = np.quantile(values, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
            summary[method][metric] = {
                "lower_quartile": float(lq),
                "median": float(med),
                "upper_quartile": float(uq),
            }
    return summary, n_failed


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run all replications and aggregate quartile summaries.

    Replications run in parallel when cfg.workers > 1; aggregation sorts
    by replication index, so the result does not depend on completion
    order.
    """
    reps = range(cfg.replications)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(_replication_worker, [(cfg, r) for r in reps]))
    else:
        raw = [_replication_worker((cfg, r)) for r in reps]
    raw.sort(key=lambda item: item[0])

    records: list[ReplicationRecord] = []
    for _, outcomes in raw:
        for method in sorted(outcomes):
            records.append(outcomes[method])
    summary, n_failed = _summarize(records)
    return ExperimentResult(config=cfg, records=records, summary=summary,
                            n_failed=n_failed)


def median_metric(result: ExperimentResult, method: str, metric: str) -> float:
    entry = result.summary[method][metric]
    if entry is None:
        raise ValueError(f"metric {metric!r} unavailable for method {method!r}")
    return entry["median"]


# ---------------------------------------------------------------------------
# Cross-sections
# ---------------------------------------------------------------------------


def cross_section(model, fixed: Mapping[int, float], axis: int, grid: int,
                  standardizer: Optional[Standardizer] = None) -> dict:
    """Predictions along one input axis with every other input held fixed.

    Returns columns x, mean, var, lower95, upper95 (plus det_mean for the
    composite model) on the natural output scale when a standardizer is
    given, otherwise on the model's training scale.
    """
    d = model.dim
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for dimension {d}")
    expected = set(range(d)) - {axis}
    if set(int(k) for k in fixed) != expected:
        raise ValueError(f"fixed must assign exactly the dimensions {sorted(expected)}")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    X = np.empty((grid, d))
    X[:, axis] = np.linspace(0.0, 1.0, grid)
    for k, v in fixed.items():
        X[:, int(k)] = float(v)
    pred = model.predict(X)
    if standardizer is None:
        mean, var = pred.mean, pred.var
        det_mean = pred.det_mean
    else:
        mean = standardizer.invert(pred.mean)
        var = standardizer.invert_var(pred.var)
        det_mean = None if pred.det_mean is None else standardizer.invert(pred.det_mean)
    sd = np.sqrt(var)
    table = {
        "x": X[:, axis].copy(),
        "mean": mean,
        "var": var,
        "lower95": mean - _Z95 * sd,
        "upper95": mean + _Z95 * sd,
    }
    if det_mean is not None:
        table["det_mean"] = det_mean
    return table


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_replications_csv(result: ExperimentResult, path) -> None:
    """Per-replication CSV: rep, method, true_mse, mse, score, fit_status."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "method", "true_mse", "mse", "score", "fit_status"])
        for r in sorted(result.records, key=lambda r: (r.rep, r.method)):
            triple = r.triple
            writer.writerow([
                r.rep, r.method,
                _fmt(None if triple is None else triple.true_mse),
                _fmt(None if triple is None else triple.mse),
                _fmt(None if triple is None else triple.score),
                r.fit_status,
            ])


def write_summary_json(result: ExperimentResult, path) -> None:
    payload = {
        "simulator_id": result.config.simulator_id,
        "methods": result.summary,
        "n_failed": result.n_failed,
        "n_replications": result.config.replications,
        "quantile_method": result.quantile_method,
        "config": result.config.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_cross_section_csv(table: dict, path) -> None:
    """Cross-section CSV: x, mean, lower95, upper95[, det_mean]."""
    columns = ["x", "mean", "lower95", "upper95"]
    if "det_mean" in table:
        columns.append("det_mean")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(len(table["x"])):
            writer.writerow([_fmt(table[c][i]) for c in columns])
