"""Round-by-round knowledge-collapse engine.

A community of ``n_agents`` chooses each round between a costly sample from
the true distribution, a discounted sample from its central truncation (the
"AI" option) or no sample at all. Contributed samples enter a fixed-size
buffer whose KDE is the public pdf. An agent's reward is the drop in
Hellinger distance to the truth caused by its own insertion; the realised
rewards are public and feed shared value estimates for both options. Every
``generation_period`` rounds a new cohort takes the public pdf's spread as
the spread of the world it samples from.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from enum import IntEnum
from typing import Optional

import numpy as np

from .density import (
    GridSpec,
    GriddedPdf,
    KdeSpec,
    eval_grid,
    hellinger,
    hellinger_sqrt,
    kde_bandwidth,
    kde_densities,
    pdf_variance,
)
from .distributions import (
    TrueDistribution,
    TruncationSpec,
    dist_std,
    rescale_distribution,
    t_sample,
    truncated_sample,
)
from .errors import ConfigError, UsageError

COLLAPSE_VARIANCE_FLOOR = 1e-6
COLLAPSE_STD_FLOOR = 1e-3
NARROWING_SLOPE = 1e-4


class Action(IntEnum):
    FULL = 0
    TRUNCATED = 1
    ABSTAIN = 2


UPDATE_RULES = ("ema", "literal")
SPARSE_RULES = ("probe", "history")
DISTANCE_REFERENCES = ("original", "current")


@dataclass(frozen=True)
class SimConfig:
    """Full parameterisation of one run.

    ``sparse_rule`` decides how an option observed fewer than
    ``min_observations`` times in a round is scored: ``probe`` tops it up
    with throw-away draws scored against the end-of-round buffer,
    ``history`` averages its most recent past observations.
    ``generation_period=None`` disables generational turnover.
    """

    n_agents: int = 25
    n_rounds: int = 100
    buffer_size: int = 100
    df: float = 10.0
    sigma_tr: float = 0.75
    delta: float = 1.0
    eta: float = 0.05
    generation_period: Optional[int] = 10
    cost_full: float = 0.035
    v_init: float = 0.01
    update_rule: str = "ema"
    min_observations: int = 3
    sparse_rule: str = "probe"
    theta_mu: float = 1.0
    theta_sigma: float = 0.5
    bandwidth: object = "silverman"
    grid_min: float = -10.0
    grid_max: float = 10.0
    grid_points: int = 1024
    retain_buffer: bool = True
    retain_estimates: bool = True
    distance_reference: str = "original"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})", field=name)

        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        def is_num(v):
            return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) \
                and math.isfinite(v)

        need(is_int(self.n_agents) and self.n_agents >= 1, "n_agents", "must be an integer >= 1")
        need(is_int(self.n_rounds) and self.n_rounds >= 1, "n_rounds", "must be an integer >= 1")
        need(is_int(self.buffer_size) and self.buffer_size >= 3, "buffer_size",
             "must be an integer >= 3")
        need(is_num(self.df) and self.df > 2, "df", "must be > 2")
        need(is_num(self.sigma_tr) and self.sigma_tr > 0, "sigma_tr", "must be > 0")
        need(is_num(self.delta) and 0 < self.delta <= 1, "delta", "must lie in (0, 1]")
        need(is_num(self.eta) and self.eta >= 0, "eta", "must be >= 0")
        need(self.generation_period is None
             or (is_int(self.generation_period) and self.generation_period >= 1),
             "generation_period", "must be null or an integer >= 1")
        need(is_num(self.cost_full) and self.cost_full > 0, "cost_full", "must be > 0")
        need(is_num(self.v_init), "v_init", "must be a finite number")
        need(self.update_rule in UPDATE_RULES, "update_rule", f"must be one of {UPDATE_RULES}")
        need(is_int(self.min_observations) and self.min_observations >= 1, "min_observations",
             "must be an integer >= 1")
        need(self.sparse_rule in SPARSE_RULES, "sparse_rule", f"must be one of {SPARSE_RULES}")
        need(is_num(self.theta_mu), "theta_mu", "must be a finite number")
        need(is_num(self.theta_sigma) and self.theta_sigma >= 0, "theta_sigma", "must be >= 0")
        need(self.bandwidth == "silverman" or (is_num(self.bandwidth) and self.bandwidth > 0),
             "bandwidth", "must be 'silverman' or a positive number")
        need(is_num(self.grid_min) and is_num(self.grid_max) and self.grid_min < self.grid_max,
             "grid_min", "must be below grid_max")
        need(is_int(self.grid_points) and self.grid_points >= 64, "grid_points",
             "must be an integer >= 64")
        need(isinstance(self.retain_buffer, bool), "retain_buffer", "must be a boolean")
        need(isinstance(self.retain_estimates, bool), "retain_estimates", "must be a boolean")
        need(self.distance_reference in DISTANCE_REFERENCES, "distance_reference",
             f"must be one of {DISTANCE_REFERENCES}")
        need(is_int(self.seed) and 0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(float(self.grid_min), float(self.grid_max), int(self.grid_points))

    @property
    def kde(self) -> KdeSpec:
        bw = self.bandwidth if self.bandwidth == "silverman" else float(self.bandwidth)
        return KdeSpec(bandwidth=bw, grid=self.grid)

    @property
    def has_generations(self) -> bool:
        return self.generation_period is not None and self.generation_period < self.n_rounds

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}", field=unknown[0])
        return cls(**data)


@dataclass(frozen=True)
class Agent:
    id: int
    theta: float


@dataclass
class ValueEstimates:
    """Shared value estimates for the full and truncated options.

    ``history_*`` hold every realised innovation per option, oldest first.
    """

    v_full: float
    v_trunc: float
    history_full: list = field(default_factory=list)
    history_trunc: list = field(default_factory=list)

    def value(self, arm: Action) -> float:
        return self.v_full if arm == Action.FULL else self.v_trunc

    def history(self, arm: Action) -> list:
        return self.history_full if arm == Action.FULL else self.history_trunc


def decide(agent: Agent, est: ValueEstimates, cost_full: float, delta: float) -> Action:
    """Option with the highest expected net payoff; ties go Full, Truncated, Abstain."""
    net_full = agent.theta * est.v_full - cost_full
    net_trunc = agent.theta * est.v_trunc - delta * cost_full
    if net_full >= net_trunc and net_full >= 0:
        return Action.FULL
    if net_trunc >= 0:
        return Action.TRUNCATED
    return Action.ABSTAIN


def innovation(public_before: GriddedPdf, public_after: GriddedPdf, truth: GriddedPdf) -> float:
    if not (public_before.grid == public_after.grid == truth.grid):
        raise UsageError("densities live on different grids")
    return hellinger(public_before, truth) - hellinger(public_after, truth)


def realized_means(
    round_obs: dict, est: ValueEstimates, min_observations: int = 3
) -> dict:
    """Per-option realised innovation used for this round's update.

    ``round_obs`` maps each option to this round's innovations, which must
    already be appended to the option's history in ``est``. With fewer than
    ``min_observations`` this round, the most recent ``min_observations``
    from the history are averaged instead; with less history than that the
    option gets ``None`` (no update).
    """
    out = {}
    for arm in (Action.FULL, Action.TRUNCATED):
        obs = round_obs.get(arm, ())
        hist = est.history(arm)
        if len(obs) >= min_observations:
            out[arm] = float(np.mean(obs))
        elif len(hist) >= min_observations:
            out[arm] = float(np.mean(hist[-min_observations:]))
        else:
            out[arm] = None
    return out


def probe_gain(state: "SimState", arm: Action, sqrt_ref: np.ndarray, weights: np.ndarray) -> float:
    """Innovation a fresh draw from ``arm`` would make if it replaced the
    oldest buffer entry. The buffer itself is left untouched."""
    x = t_sample(state.rng, state.dist) if arm == Action.FULL \
        else truncated_sample(state.rng, state.dist, state.trunc)
    vals = np.fromiter(state.public.values, dtype=float, count=len(state.public.values))
    s = np.sort(np.append(vals[1:], x))
    grid = state.public.spec.grid
    d = kde_densities(s, grid, kde_bandwidth(s, state.public.spec))
    d /= grid.weights @ d
    return hellinger_sqrt(np.sqrt(state.public.densities), sqrt_ref, weights) \
        - hellinger_sqrt(np.sqrt(d), sqrt_ref, weights)


def probed_means(state: "SimState", round_obs: dict, sqrt_ref, weights) -> dict:
    """Per-option realised innovation where an option observed fewer than
    ``min_observations`` times this round is topped up with probe draws."""
    k = state.config.min_observations
    out = {}
    for arm in (Action.FULL, Action.TRUNCATED):
        obs = list(round_obs.get(arm, ()))
        while len(obs) < k:
            obs.append(probe_gain(state, arm, sqrt_ref, weights))
        out[arm] = float(np.mean(obs))
    return out


def update_estimates(est: ValueEstimates, realized: dict, eta: float, rule: str = "ema") -> ValueEstimates:
    """Move each estimate by ``eta`` relative to its realised innovation.

    ``ema`` moves toward the observation, ``literal`` applies
    ``v + eta * (v - I)``, which moves away from it.
    """
    if rule not in UPDATE_RULES:
        raise ConfigError(f"unknown update rule {rule!r}", field="update_rule")

    def step(v, obs):
        if obs is None:
            return v
        if rule == "ema":
            return v + eta * (obs - v)
        return v + eta * (v - obs)

    return ValueEstimates(
        v_full=step(est.v_full, realized.get(Action.FULL)),
        v_trunc=step(est.v_trunc, realized.get(Action.TRUNCATED)),
        history_full=list(est.history_full),
        history_trunc=list(est.history_trunc),
    )


@dataclass(frozen=True)
class RoundRecord:
    round: int
    generation: int
    actions: tuple
    innovations: tuple
    n_full: int
    n_trunc: int
    n_abstain: int
    hellinger: float
    variance: float
    v_full: float
    v_trunc: float
    sampling_std: float


class _PublicPdf:
    """Buffer of recent samples plus the cached KDE fitted over it."""

    def __init__(self, spec: KdeSpec, capacity: int):
        self.spec = spec
        self.values = deque(maxlen=capacity)
        self.arms = deque(maxlen=capacity)
        self.densities = None

    def extend(self, values, arms):
        self.values.extend(values)
        self.arms.extend(arms)
        self.refit()

    def push(self, value: float, arm: Action):
        self.values.append(value)
        self.arms.append(arm)
        self.refit()

    def refit(self):
        s = np.sort(np.fromiter(self.values, dtype=float, count=len(self.values)))
        h = kde_bandwidth(s, self.spec)
        grid = self.spec.grid
        d = kde_densities(s, grid, h)
        self.densities = d / (self._weights @ d)

    @property
    def _weights(self):
        w = getattr(self, "_w", None)
        if w is None:
            w = self._w = self.spec.grid.weights
        return w

    def pdf(self) -> GriddedPdf:
        return GriddedPdf(self.spec.grid, self.densities.copy())


@dataclass
class SimState:
    config: SimConfig
    rng: np.random.Generator
    agents: list
    estimates: ValueEstimates
    dist: TrueDistribution
    trunc: TruncationSpec
    public: _PublicPdf
    truth_pdf: GriddedPdf
    round: int = 0
    generation: int = 0
    events: list = field(default_factory=list)

    @property
    def public_pdf(self) -> GriddedPdf:
        return self.public.pdf()

    @property
    def buffer(self) -> list:
        return list(self.public.values)

    def reference_pdf(self) -> GriddedPdf:
        """Density distances are measured against."""
        if self.config.distance_reference == "current":
            return eval_grid(self.dist, self.config.grid)
        return self.truth_pdf

    def copy(self) -> "SimState":
        return copy.deepcopy(self)


def _draw_agents(rng: np.random.Generator, cfg: SimConfig) -> list:
    thetas = rng.lognormal(cfg.theta_mu, cfg.theta_sigma, size=cfg.n_agents)
    return [Agent(i, float(t)) for i, t in enumerate(thetas)]


def init_state(cfg: SimConfig) -> SimState:
    """Fresh run: agents drawn, both estimates at ``v_init``, buffer filled
    with ``buffer_size`` draws from the full true distribution."""
    rng = np.random.default_rng(cfg.seed)
    dist = TrueDistribution(df=float(cfg.df))
    trunc = TruncationSpec.for_distribution(dist, cfg.sigma_tr)
    agents = _draw_agents(rng, cfg)
    public = _PublicPdf(cfg.kde, cfg.buffer_size)
    public.extend(t_sample(rng, dist, size=cfg.buffer_size).tolist(), [Action.FULL] * cfg.buffer_size)
    return SimState(
        config=cfg,
        rng=rng,
        agents=agents,
        estimates=ValueEstimates(cfg.v_init, cfg.v_init),
        dist=dist,
        trunc=trunc,
        public=public,
        truth_pdf=eval_grid(dist, cfg.grid),
    )


def run_round(state: SimState) -> tuple:
    """Advance ``state`` by one round in place; returns ``(state, record)``."""
    cfg = state.config
    rng = state.rng
    actions = [decide(a, state.estimates, cfg.cost_full, cfg.delta) for a in state.agents]

    draws = {}
    for agent, act in zip(state.agents, actions):
        if act == Action.FULL:
            draws[agent.id] = t_sample(rng, state.dist)
        elif act == Action.TRUNCATED:
            draws[agent.id] = truncated_sample(rng, state.dist, state.trunc)

    ref = state.reference_pdf()
    sqrt_ref = np.sqrt(ref.densities)
    weights = ref.grid.weights
    dist_now = hellinger_sqrt(np.sqrt(state.public.densities), sqrt_ref, weights)

    innovations = [math.nan] * len(state.agents)
    round_obs = {Action.FULL: [], Action.TRUNCATED: []}
    contributors = np.fromiter(draws.keys(), dtype=np.int64, count=len(draws))
    for agent_id in rng.permutation(contributors).tolist():
        arm = actions[agent_id]
        state.public.push(draws[agent_id], arm)
        dist_new = hellinger_sqrt(np.sqrt(state.public.densities), sqrt_ref, weights)
        gain = dist_now - dist_new
        dist_now = dist_new
        innovations[agent_id] = gain
        round_obs[arm].append(gain)

    est = state.estimates
    for arm, obs in round_obs.items():
        est.history(arm).extend(obs)
    if cfg.sparse_rule == "probe":
        realized = probed_means(state, round_obs, sqrt_ref, weights)
    else:
        realized = realized_means(round_obs, est, cfg.min_observations)
    state.estimates = update_estimates(est, realized, cfg.eta, cfg.update_rule)
    state.round += 1

    n_full = sum(1 for a in actions if a == Action.FULL)
    n_trunc = sum(1 for a in actions if a == Action.TRUNCATED)
    record = RoundRecord(
        round=state.round,
        generation=state.generation,
        actions=tuple(a.name.lower() for a in actions),
        innovations=tuple(innovations),
        n_full=n_full,
        n_trunc=n_trunc,
        n_abstain=len(actions) - n_full - n_trunc,
        hellinger=dist_now,
        variance=pdf_variance(state.public.pdf()),
        v_full=state.estimates.v_full,
        v_trunc=state.estimates.v_trunc,
        sampling_std=dist_std(state.dist),
    )
    return state, record


def generation_turnover(state: SimState) -> SimState:
    """New cohort: sampling spread reset to the public pdf's spread,
    truncation window rebuilt, agent types redrawn. Buffer and estimates are
    kept unless the config says otherwise."""
    cfg = state.config
    var = pdf_variance(state.public.pdf())
    if var < COLLAPSE_VARIANCE_FLOOR:
        state.events.append(f"collapse_floor:round={state.round}")
        new_std = COLLAPSE_STD_FLOOR
    else:
        new_std = math.sqrt(var)
    state.dist = rescale_distribution(state.dist, new_std)
    state.trunc = TruncationSpec.for_distribution(state.dist, cfg.sigma_tr)
    state.agents = _draw_agents(state.rng, cfg)
    if not cfg.retain_estimates:
        state.estimates = ValueEstimates(cfg.v_init, cfg.v_init)
    if not cfg.retain_buffer:
        fresh = t_sample(state.rng, state.dist, size=cfg.buffer_size).tolist()
        state.public.extend(fresh, [Action.FULL] * cfg.buffer_size)
    state.generation += 1
    return state


@dataclass(frozen=True, eq=False)
class SimResult:
    config: SimConfig
    records: tuple
    final_pdf: GriddedPdf
    truth_pdf: GriddedPdf
    final_hellinger: float
    variance_trajectory: np.ndarray
    events: tuple = ()

    @property
    def status(self) -> str:
        return "collapse_floor" if any(e.startswith("collapse_floor") for e in self.events) else "ok"

    @property
    def hellinger_trajectory(self) -> np.ndarray:
        return np.array([r.hellinger for r in self.records])

    def __eq__(self, other):
        if not isinstance(other, SimResult):
            return NotImplemented
        return (
            self.config == other.config
            and _records_equal(self.records, other.records)
            and self.final_pdf == other.final_pdf
            and self.final_hellinger == other.final_hellinger
            and np.array_equal(self.variance_trajectory, other.variance_trajectory)
            and self.events == other.events
        )


def _records_equal(a, b) -> bool:
    # NaN innovations (abstainers) must compare equal
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        da, db = asdict(ra), asdict(rb)
        ia, ib = da.pop("innovations"), db.pop("innovations")
        if da != db or not np.array_equal(np.array(ia), np.array(ib), equal_nan=True):
            return False
    return True


def run_simulation(config: SimConfig) -> SimResult:
    state = init_state(config)
    records = []
    period = config.generation_period
    for _ in range(config.n_rounds):
        state, rec = run_round(state)
        records.append(rec)
        # a turnover after the final round could not affect any output
        if period is not None and state.round % period == 0 and state.round < config.n_rounds:
            generation_turnover(state)
    final = state.public.pdf()
    return SimResult(
        config=config,
        records=tuple(records),
        final_pdf=final,
        truth_pdf=state.truth_pdf,
        final_hellinger=records[-1].hellinger,
        variance_trajectory=np.array([r.variance for r in records]),
        events=tuple(state.events),
    )


@dataclass(frozen=True)
class CollapseMetrics:
    variance_trajectory: np.ndarray
    slope: float
    narrowing: bool
    final_distance: float


def collapse_metrics(result: SimResult) -> CollapseMetrics:
    """Variance trend of the public pdf; ``narrowing`` when the fitted linear
    slope is below ``-NARROWING_SLOPE`` per round."""
    v = np.asarray(result.variance_trajectory, dtype=float)
    if v.size < 2:
        slope = 0.0
    else:
        slope = float(np.polyfit(np.arange(v.size, dtype=float), v, 1)[0])
    return CollapseMetrics(v, slope, slope < -NARROWING_SLOPE, result.final_hellinger)
