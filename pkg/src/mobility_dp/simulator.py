"""Generational rollouts and a finite-population Monte Carlo check.

Deterministic rollouts follow the macro recurrence exactly. The Monte Carlo
side draws individual agents (ability, circumstance), applies the thresholds
literally, and compares each generation's observed reward and disadvantaged
share with what the macro equations predict from the observed starting state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import Degenerate
from .model import (
    ModelParams,
    ThresholdPair,
    admissible_range,
    bounds_array,
    paired_threshold,
    period_reward,
    resample_array,
    transition,
    transition_array,
)
from .solver import Solution

Policy = Union[Callable[[float], float], Solution]


def _as_callable(policy: Policy) -> Callable[[float], float]:
    if isinstance(policy, Solution):
        return policy.policy_at
    return policy


def _theta1_or_nan(phi0, theta0, params):
    try:
        return paired_threshold(phi0, theta0, params)
    except Degenerate:
        return math.nan


@dataclass(frozen=True)
class Step:
    t: int
    phi0: float
    theta0: float
    theta1: float
    reward: float
    discounted_cumulative: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple
    params: ModelParams
    final_phi0: float  # state after the last recorded step
    clamp_events: int = 0

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def tail_bound(self) -> float:
        return tail_bound(self.params, self.horizon)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])


def tail_bound(params: ModelParams, horizon: int) -> float:
    """Largest possible discounted reward left after ``horizon`` generations."""
    p = params
    return p.alpha * (p.sigma + p.tau) * p.gamma ** horizon / (1.0 - p.gamma)


def rollout(phi0_init: float, policy: Policy, params: ModelParams, horizon: int) -> Trajectory:
    """Follow ``policy`` for ``horizon`` generations.

    Thresholds outside the admissible window are clamped into it and counted
    in ``clamp_events``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    choose = _as_callable(policy)
    phi = float(phi0_init)
    admissible_range(phi, params)  # domain check
    discount, total, clamps = 1.0, 0.0, 0
    steps = []
    for t in range(horizon):
        window = admissible_range(phi, params)
        theta0 = float(choose(phi))
        if not (window.lo <= theta0 <= window.hi):
            clamps += 1
            theta0 = window.clamp(theta0)
        r = period_reward(phi, theta0, params)
        total += discount * r
        steps.append(Step(t, phi, theta0, _theta1_or_nan(phi, theta0, params), r, total))
        phi = transition(phi, theta0, params)
        discount *= params.gamma
    return Trajectory(tuple(steps), params, phi, clamps)


def discounted_return(trajectory: Trajectory, gamma: float) -> float:
    total, discount = 0.0, 1.0
    for step in trajectory.steps:
        total += discount * step.reward
        discount *= gamma
    return total


@dataclass(frozen=True)
class Absorbing:
    phi0_init: float
    phi0_absorbing: float
    settled: bool  # last 10 steps each moved less than 1e-9


def absorbing_map(initial_states: Sequence[float], solution: Solution, params: ModelParams,
                  horizon: int = 1000) -> list[Absorbing]:
    """Long-run state under the solution's policy, for many starting shares at once.

    Same dynamics as `rollout` with nearest-grid-state policy lookup, just
    vectorized over starting states.
    """
    phi = np.array(initial_states, dtype=float)
    init = phi.copy()
    n = len(solution.states) - 1
    moves = np.zeros((0, phi.size))
    for t in range(horizon):
        theta0 = solution.policy_theta0[np.rint(phi * n).astype(np.int64)]
        lo, hi = bounds_array(phi, params)
        theta0 = np.clip(theta0, lo, hi)
        nxt = transition_array(phi, theta0, params)
        if t >= horizon - 10:
            moves = np.vstack([moves, np.abs(nxt - phi)])
        phi = nxt
    settled = (moves < 1e-9).all(axis=0)
    return [Absorbing(float(a), float(b), bool(s)) for a, b, s in zip(init, phi, settled)]


def absorbing_state(phi0_init: float, solution: Solution, params: ModelParams,
                    horizon: int = 1000) -> Absorbing:
    traj = rollout(phi0_init, solution, params, horizon)
    phis = np.append(traj.column("phi0"), traj.final_phi0)
    settled = bool(np.all(np.abs(np.diff(phis[-11:])) < 1e-9))
    return Absorbing(float(phi0_init), traj.final_phi0, settled)


def drift_path(phi0_init: float, params: ModelParams, horizon: int = 1000) -> np.ndarray:
    """Disadvantaged share with no opportunities handed out, only spontaneous movement."""
    path = np.empty(horizon + 1)
    path[0] = phi0_init
    for t in range(horizon):
        path[t + 1] = resample_array(path[t], params)
    return path


# -- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    n_agents: int = 100_000
    generations: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_agents < 1000:
            raise ValueError("n_agents must be >= 1000")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def generation_rng(seed: int, generation: int) -> np.random.Generator:
    """Counter-based stream for one generation, derived from the root seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(generation,))))


@dataclass(frozen=True, eq=False)
class AgentPopulation:
    ability: np.ndarray
    circumstance: np.ndarray  # 0 = disadvantaged, 1 = advantaged
    generation: int = 0
    seed: int = 0

    @property
    def size(self) -> int:
        return len(self.ability)

    @property
    def phi0(self) -> float:
        return float(np.count_nonzero(self.circumstance == 0)) / self.size

    @classmethod
    def initial(cls, n_agents: int, phi0: float, seed: int = 0) -> "AgentPopulation":
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(2 ** 32,))))
        n_d = int(round(phi0 * n_agents))
        circ = np.ones(n_agents, dtype=np.int8)
        circ[:n_d] = 0
        return cls(rng.random(n_agents), circ, 0, seed)


def mc_generation(population: AgentPopulation, pair: ThresholdPair, params: ModelParams,
                  rng: np.random.Generator):
    """Advance one generation; returns (next population, reward, next disadvantaged share)."""
    n = population.size
    a, c = population.ability, population.circumstance
    u_success, u_move, u_background, new_ability = (rng.random(n) for _ in range(4))
    p = params.sigma * a + params.tau * c
    selected = p >= np.where(c == 1, pair.theta1, pair.theta0)
    success = selected & (u_success < p)
    reward = np.count_nonzero(success) / n
    post = np.where(success, 1, c).astype(np.int8)
    phi_post = np.count_nonzero(post == 0) / n
    moves = u_move < np.where(post == 0, params.p_d, params.p_a)
    drawn = np.where(u_background < phi_post, 0, 1).astype(np.int8)
    child = np.where(moves, drawn, post).astype(np.int8)
    nxt = AgentPopulation(new_ability, child, population.generation + 1, population.seed)
    return nxt, reward, nxt.phi0


def standard_error(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _z(observed, predicted, se):
    if se > 0.0:
        return (observed - predicted) / se
    return 0.0 if observed == predicted else math.inf


@dataclass(frozen=True)
class McRecord:
    generation: int
    phi0: float
    theta0: float
    theta1: float
    reward_observed: float
    reward_predicted: float
    reward_se: float
    reward_z: float
    phi0_next_observed: float
    phi0_next_predicted: float
    phi0_next_se: float
    phi0_next_z: float


@dataclass(frozen=True)
class McReport:
    records: tuple
    n_agents: int
    seed: int
    params: ModelParams = field(repr=False, default=None)

    def z_scores(self) -> np.ndarray:
        return np.array([z for r in self.records for z in (r.reward_z, r.phi0_next_z)])

    def fraction_beyond(self, z: float = 3.0) -> float:
        return float(np.mean(np.abs(self.z_scores()) > z))

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "seed": self.seed,
            "fraction_abs_z_gt_3": self.fraction_beyond(3.0),
            "records": [r.__dict__ for r in self.records],
        }


def mc_rollout(phi0_init: float, policy: Policy, params: ModelParams, mc_config: McConfig) -> McReport:
    """Simulate agents and score each generation against the macro equations.

    Predictions are one step ahead: they start from the observed share of the
    current generation, so errors do not compound.
    """
    choose = _as_callable(policy)
    pop = AgentPopulation.initial(mc_config.n_agents, phi0_init, mc_config.seed)
    n = pop.size
    s, t = params.sigma, params.tau
    records = []
    for g in range(mc_config.generations):
        phi = pop.phi0
        theta0 = admissible_range(phi, params).clamp(float(choose(phi)))
        theta1 = _theta1_or_nan(phi, theta0, params)
        pair = ThresholdPair(theta0, s + t if math.isnan(theta1) else theta1)
        r_pred = period_reward(phi, theta0, params)
        phi_pred = transition(phi, theta0, params)
        pop, r_obs, phi_obs = mc_generation(pop, pair, params, generation_rng(mc_config.seed, g))
        r_se, phi_se = standard_error(r_pred, n), standard_error(phi_pred, n)
        records.append(McRecord(g, phi, theta0, theta1, r_obs, r_pred, r_se, _z(r_obs, r_pred, r_se),
                                phi_obs, phi_pred, phi_se, _z(phi_obs, phi_pred, phi_se)))
    return McReport(tuple(records), n, mc_config.seed, params)
