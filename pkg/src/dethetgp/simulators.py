"""Built-in stochastic simulators and their deterministic approximations.

Each toy simulator is a cheap analytic test signal with input-dependent
Gaussian noise, so its true mean and standard deviation are known exactly.
The deterministic approximation replaces the noise draw with a fixed value,
mimicking a simulator whose random component has been switched off.

The SIR pair is a discrete-time individual contact model (stochastic) and
the matching compartmental difference equations (deterministic). No
analytic moments exist for it, so metrics that need the true mean are
unavailable for "sir".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class SimOutput:
    """Scalar result of one simulator run."""

    value: float
    was_deterministic: bool

    def __post_init__(self):
        self.value = float(self.value)
        if not math.isfinite(self.value):
            raise ValueError("simulator output is not finite")


@dataclass
class TrueMoments:
    """Analytic mean and standard deviation of a stochastic simulator at one input."""

    mean: float
    sd: float

    def __post_init__(self):
        if self.sd < 0.0:
            raise ValueError("sd must be non-negative")


def _check_unit(x, name: str = "x"):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


# ---------------------------------------------------------------------------
# 1-d wiggly toy: (1-x) sin(pi + 6 pi x) + log(0.2 + x), noise sd (1.2 - x)
# ---------------------------------------------------------------------------


def _toy1_mean(x):
    return (1.0 - x) * np.sin(np.pi + 6.0 * np.pi * x) + np.log(0.2 + x)


def _toy1_sd(x):
    return 1.2 - x


def toy1(x: float, rng: np.random.Generator) -> SimOutput:
    x = float(_check_unit(x))
    eps = rng.standard_normal()
    return SimOutput(_toy1_mean(x) + _toy1_sd(x) * eps, was_deterministic=False)


def toy1_det(x: float) -> SimOutput:
    """Deterministic approximation: the noise draw is pinned at 1."""
    x = float(_check_unit(x))
    return SimOutput(_toy1_mean(x) + _toy1_sd(x) * 1.0, was_deterministic=True)


def toy1_moments(x: float) -> TrueMoments:
    x = float(_check_unit(x))
    return TrueMoments(mean=float(_toy1_mean(x)), sd=abs(float(_toy1_sd(x))))


# ---------------------------------------------------------------------------
# 2-d sine toy: 2 sin(2 pi x1) + 2 sin(2 pi x2), per-axis noise sd (0.5 + xi)
# ---------------------------------------------------------------------------


def _goldberg2d_mean(x1, x2):
    return 2.0 * np.sin(2.0 * np.pi * x1) + 2.0 * np.sin(2.0 * np.pi * x2)


def toy_goldberg2d(x1: float, x2: float, rng: np.random.Generator) -> SimOutput:
    x1 = float(_check_unit(x1, "x1"))
    x2 = float(_check_unit(x2, "x2"))
    e1, e2 = rng.standard_normal(2)
    value = _goldberg2d_mean(x1, x2) + (0.5 + x1) * e1 + (0.5 + x2) * e2
    return SimOutput(value, was_deterministic=False)


def toy_goldberg2d_det(x1: float, x2: float) -> SimOutput:
    """Deterministic approximation: noise draws pinned at +0.5 and -0.5."""
    x1 = float(_check_unit(x1, "x1"))
    x2 = float(_check_unit(x2, "x2"))
    value = _goldberg2d_mean(x1, x2) + (0.5 + x1) * 0.5 + (0.5 + x2) * (-0.5)
    return SimOutput(value, was_deterministic=True)


def toy_goldberg2d_moments(x1: float, x2: float) -> TrueMoments:
    x1 = float(_check_unit(x1, "x1"))
    x2 = float(_check_unit(x2, "x2"))
    sd = math.sqrt((0.5 + x1) ** 2 + (0.5 + x2) ** 2)
    return TrueMoments(mean=float(_goldberg2d_mean(x1, x2)), sd=sd)


# ---------------------------------------------------------------------------
# 1-d sharp toy: (6x-2)^2 sin(12x-4), noise sd (1.1 + sin(2 pi x))
# ---------------------------------------------------------------------------


def _binois_mean(x):
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def _binois_sd(x):
    return 1.1 + np.sin(2.0 * np.pi * x)


def toy_binois(x: float, rng: np.random.Generator) -> SimOutput:
    x = float(_check_unit(x))
    eps = rng.standard_normal()
    return SimOutput(_binois_mean(x) + _binois_sd(x) * eps, was_deterministic=False)


def toy_binois_det(x: float) -> SimOutput:
    """Deterministic approximation: the noise draw is pinned at 1."""
    x = float(_check_unit(x))
    return SimOutput(_binois_mean(x) + _binois_sd(x) * 1.0, was_deterministic=True)


def toy_binois_moments(x: float) -> TrueMoments:
    x = float(_check_unit(x))
    return TrueMoments(mean=float(_binois_mean(x)), sd=abs(float(_binois_sd(x))))


# ---------------------------------------------------------------------------
# SIR pair: individual contact model and compartmental difference equations
# ---------------------------------------------------------------------------


@dataclass
class SirParams:
    """Parameters of the SIR pair.

    `act_rate` is the expected number of infection-risk contacts each
    infected individual makes per time step. When left as None it defaults
    to 0.01 * pop, i.e. a per-pair interaction rate of 0.01 scaled by the
    population size.
    """

    inf_prob: float
    rec_rate: float
    pop: int = 1000
    init_infected: int = 5
    steps: int = 300
    act_rate: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.inf_prob <= 1.0:
            raise ValueError("inf_prob must lie in [0, 1]")
        if not 0.0 <= self.rec_rate <= 1.0:
            raise ValueError("rec_rate must be a per-step probability in [0, 1]")
        if self.pop < 1:
            raise ValueError("pop must be at least 1")
        if not 0 <= self.init_infected <= self.pop:
            raise ValueError("init_infected must lie in [0, pop]")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.act_rate is None:
            self.act_rate = 0.01 * self.pop
        if self.act_rate < 0.0:
            raise ValueError("act_rate must be non-negative")


_S, _I, _R = 0, 1, 2


def sir_icm(p: SirParams, rng: np.random.Generator) -> SimOutput:
    """Individual contact model: infected proportion after `p.steps` steps.

    Per step, each currently infected individual draws a Binomial(pop,
    act_rate/pop) number of contacts; each contact lands on a uniformly
    chosen member of the population and infects a susceptible target with
    probability `inf_prob`. Individuals infected before the step then
    recover independently with probability `rec_rate`.

    The contact mechanics are sampled in aggregated form (total contacts,
    then Binomial thinning to transmitting contacts on susceptibles, then
    uniform collision-aware targets among the susceptibles), which draws
    from exactly the same distribution as the per-contact description.
    """
    state = np.zeros(p.pop, dtype=np.int8)
    state[: p.init_infected] = _I
    contact_p = min(p.act_rate / p.pop, 1.0)
    for _ in range(p.steps):
        infected = np.flatnonzero(state == _I)
        if infected.size == 0:
            break
        susceptible = np.flatnonzero(state == _S)
        n_contacts = int(rng.binomial(p.pop * infected.size, contact_p))
        if n_contacts > 0 and susceptible.size > 0:
            hit_prob = p.inf_prob * susceptible.size / p.pop
            n_transmitting = int(rng.binomial(n_contacts, hit_prob))
            if n_transmitting > 0:
                hits = np.unique(rng.integers(0, susceptible.size, size=n_transmitting))
                state[susceptible[hits]] = _I
        recovered = infected[rng.random(infected.size) < p.rec_rate]
        state[recovered] = _R
    return SimOutput(float(np.mean(state == _I)), was_deterministic=False)


def sir_dcm(p: SirParams) -> SimOutput:
    """Compartmental difference equations matched to the contact model's rates.

    S + I + R conserves the population exactly at every step (R is defined
    as pop - S - I).
    """
    s = float(p.pop - p.init_infected)
    i = float(p.init_infected)
    for _ in range(p.steps):
        new_inf = min(p.act_rate * i * (s / p.pop) * p.inf_prob, s)
        new_rec = p.rec_rate * i
        s -= new_inf
        i += new_inf - new_rec
    return SimOutput(i / p.pop, was_deterministic=True)


def sir_dcm_trajectory(p: SirParams) -> np.ndarray:
    """(steps+1) x 3 array of (S, I, R) compartment sizes over time."""
    s = float(p.pop - p.init_infected)
    i = float(p.init_infected)
    out = np.empty((p.steps + 1, 3))
    out[0] = (s, i, p.pop - s - i)
    for t in range(p.steps):
        new_inf = min(p.act_rate * i * (s / p.pop) * p.inf_prob, s)
        new_rec = p.rec_rate * i
        s -= new_inf
        i += new_inf - new_rec
        out[t + 1] = (s, i, p.pop - s - i)
    return out


def _sir_params_from_unit(row) -> SirParams:
    # x1 -> infection probability in [0.5, 1]; x2 -> recovery rate in [0, 0.01]
    x1, x2 = float(row[0]), float(row[1])
    _check_unit(x1, "x1")
    _check_unit(x2, "x2")
    return SirParams(inf_prob=0.5 + 0.5 * x1, rec_rate=0.01 * x2)


# ---------------------------------------------------------------------------
# Registry: simulators addressable by string id
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Simulator:
    """Batch interface over one stochastic/deterministic simulator pair.

    `sample` evaluates the stochastic simulator at every row of X using
    draws from `rng`; `run_deterministic` evaluates the deterministic
    approximation. `true_mean`/`true_sd` are None when no analytic moments
    exist.
    """

    sim_id: str
    dim: int
    sample: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    run_deterministic: Callable[[np.ndarray], np.ndarray]
    true_mean: Optional[Callable[[np.ndarray], np.ndarray]] = None
    true_sd: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def has_true_moments(self) -> bool:
        return self.true_mean is not None


def _unit_matrix(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != dim:
        raise ValueError(f"expected {dim} input columns, got {X.shape[1]}")
    return _check_unit(X, "X")


def _toy_simulator(sim_id, dim, mean_fn, sd_fn, det_offset_fn) -> Simulator:
    def sample(X, rng):
        X = _unit_matrix(X, dim)
        return mean_fn(X) + sd_fn(X) * rng.standard_normal(X.shape[0])

    def run_det(X):
        X = _unit_matrix(X, dim)
        return mean_fn(X) + det_offset_fn(X)

    def true_mean(X):
        return mean_fn(_unit_matrix(X, dim))

    def true_sd(X):
        return np.abs(sd_fn(_unit_matrix(X, dim)))

    return Simulator(sim_id, dim, sample, run_det, true_mean, true_sd)


def _goldberg_sample(X, rng):
    X = _unit_matrix(X, 2)
    e = rng.standard_normal((X.shape[0], 2))
    return (
        _goldberg2d_mean(X[:, 0], X[:, 1])
        + (0.5 + X[:, 0]) * e[:, 0]
        + (0.5 + X[:, 1]) * e[:, 1]
    )


def _goldberg_det(X):
    X = _unit_matrix(X, 2)
    return _goldberg2d_mean(X[:, 0], X[:, 1]) + 0.5 * (0.5 + X[:, 0]) - 0.5 * (0.5 + X[:, 1])


def _sir_sample(X, rng):
    X = _unit_matrix(X, 2)
    return np.array([sir_icm(_sir_params_from_unit(row), rng).value for row in X])


def _sir_det(X):
    X = _unit_matrix(X, 2)
    return np.array([sir_dcm(_sir_params_from_unit(row)).value for row in X])


SIMULATORS: dict[str, Simulator] = {
    "toy1": _toy_simulator(
        "toy1", 1,
        lambda X: _toy1_mean(X[:, 0]),
        lambda X: _toy1_sd(X[:, 0]),
        lambda X: _toy1_sd(X[:, 0]),
    ),
    "goldberg2d": Simulator(
        "goldberg2d", 2,
        _goldberg_sample,
        _goldberg_det,
        lambda X: _goldberg2d_mean(_unit_matrix(X, 2)[:, 0], _unit_matrix(X, 2)[:, 1]),
        lambda X: np.sqrt(
            (0.5 + _unit_matrix(X, 2)[:, 0]) ** 2 + (0.5 + _unit_matrix(X, 2)[:, 1]) ** 2
        ),
    ),
    "binois": _toy_simulator(
        "binois", 1,
        lambda X: _binois_mean(X[:, 0]),
        lambda X: _binois_sd(X[:, 0]),
        lambda X: _binois_sd(X[:, 0]),
    ),
    "sir": Simulator("sir", 2, _sir_sample, _sir_det),
}


def get_simulator(sim_id: str) -> Simulator:
    try:
        return SIMULATORS[sim_id]
    except KeyError:
        known = ", ".join(sorted(SIMULATORS))
        raise ValueError(f"unknown simulator_id {sim_id!r}; known ids: {known}") from None
