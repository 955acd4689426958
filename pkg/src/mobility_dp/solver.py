"""Discretized infinite-horizon solver for the allocation decision process.

States are equidistant disadvantaged shares in [0, 1]; actions are
equidistant disadvantaged thresholds in [0, sigma]. Each state only admits
the actions inside its capacity window. Next states fall off the grid, so
the continuation value is read by linear interpolation (default) or by
snapping to the nearest state.

Every sweep is synchronous: the whole value table is read, then replaced,
so results never depend on sweep order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .model import ModelParams, bounds_array, reward_array, theta1_array, transition_array

log = logging.getLogger(__name__)

# Actions whose Q-value is within this of the best are ties; ties go to the
# largest theta0.
TIE_TOL = 1e-12
WINDOW_TOL = 1e-9
INTERPOLATIONS = ("linear", "nearest")
METHODS = ("value-iteration", "policy-iteration")
ACTION_SEARCHES = ("auto", "refine", "grid")


@dataclass(frozen=True)
class SolverConfig:
    n_states: int = 1001
    n_actions: int = 1001
    tolerance: float = 1e-9
    max_iterations: int = 200_000
    interpolation: str = "linear"
    method: str = "value-iteration"
    action_search: str = "auto"  # refine under linear interpolation, grid under nearest
    eval_tolerance: float = 1e-12
    eval_max_iterations: int = 1_000_000

    def __post_init__(self):
        for name in ("n_states", "n_actions", "max_iterations", "eval_max_iterations"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"solver.{name}", f"expected an integer, got {value!r}")
        if self.n_states < 2 or self.n_actions < 2:
            raise ConfigError("solver.n_states", "grids need at least 2 points")
        if self.max_iterations < 1 or self.eval_max_iterations < 1:
            raise ConfigError("solver.max_iterations", "must be >= 1")
        for name in ("tolerance", "eval_tolerance"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0 or not math.isfinite(value):
                raise ConfigError(f"solver.{name}", f"must be a positive number, got {value!r}")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigError("solver.interpolation", f"expected one of {INTERPOLATIONS}")
        if self.method not in METHODS:
            raise ConfigError("solver.method", f"expected one of {METHODS}")
        if self.action_search not in ACTION_SEARCHES:
            raise ConfigError("solver.action_search", f"expected one of {ACTION_SEARCHES}")


@dataclass(frozen=True, eq=False)
class Grid:
    states: np.ndarray
    actions: np.ndarray
    window_lo: np.ndarray  # first admissible action index per state
    window_hi: np.ndarray  # last admissible action index per state (inclusive)
    theta_lo: np.ndarray  # exact admissible bounds, used to clip window actions
    theta_hi: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def state_step(self) -> float:
        return 1.0 / (self.n_states - 1)

    @property
    def action_step(self) -> float:
        return float(self.actions[-1]) / (self.n_actions - 1)

    def admissible_mask(self) -> np.ndarray:
        j = np.arange(self.n_actions)
        return (j >= self.window_lo[:, None]) & (j <= self.window_hi[:, None])

    def effective_actions(self) -> np.ndarray:
        """(n_states, n_actions) table of thresholds clipped into each window."""
        return np.clip(self.actions[None, :], self.theta_lo[:, None], self.theta_hi[:, None])


def build_grid(config: SolverConfig, params: ModelParams) -> Grid:
    states = np.linspace(0.0, 1.0, config.n_states)
    actions = params.sigma * np.linspace(0.0, 1.0, config.n_actions)
    step = params.sigma / (config.n_actions - 1)
    lo, hi = bounds_array(states, params)
    j_lo = np.ceil((lo - WINDOW_TOL) / step).astype(np.int64)
    j_hi = np.floor((hi + WINDOW_TOL) / step).astype(np.int64)
    # windows narrower than one action step keep the action nearest their middle
    empty = j_lo > j_hi
    if empty.any():
        mid = np.rint(0.5 * (lo + hi) / step).astype(np.int64)
        j_lo = np.where(empty, mid, j_lo)
        j_hi = np.where(empty, mid, j_hi)
    last = config.n_actions - 1
    return Grid(states, actions, np.clip(j_lo, 0, last), np.clip(j_hi, 0, last), lo, hi)


def _interp_weights(phi, n_states: int, mode: str):
    """Lower bracketing index and weight on the upper neighbour."""
    pos = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0) * (n_states - 1)
    nearest = np.rint(pos)
    if mode == "nearest":
        pos = nearest
    else:
        # land exactly on grid points despite rounding in phi * (n - 1)
        pos = np.where(np.abs(pos - nearest) < 1e-9, nearest, pos)
    idx = np.minimum(np.floor(pos), n_states - 2).astype(np.int64)
    return idx, pos - idx


def interpolate_value(values, grid: Grid, phi, mode: str = "linear"):
    """Value table read at off-grid shares; exact at grid points in both modes."""
    if mode not in INTERPOLATIONS:
        raise ValueError(f"unknown interpolation {mode!r}")
    phi_arr = np.asarray(phi, dtype=float)
    if np.any(phi_arr < -1e-12) or np.any(phi_arr > 1.0 + 1e-12) or not np.all(np.isfinite(phi_arr)):
        raise DomainError(f"phi={phi!r} outside [0, 1]")
    values = np.asarray(values, dtype=float)
    idx, w = _interp_weights(phi_arr, grid.n_states, mode)
    out = (1.0 - w) * values[idx] + w * values[idx + 1]
    return float(out) if out.ndim == 0 else out


def golden_max(f, a, b, iterations: int = 64):
    """Elementwise maximizer of a unimodal ``f`` on ``[a, b]`` (golden section)."""
    r = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - r * (b - a)
    d = a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        x_new = np.where(left, b - r * (b - a), a + r * (b - a))
        f_new = f(x_new)
        c, d, fc, fd = (np.where(left, x_new, d), np.where(left, c, x_new),
                        np.where(left, f_new, fd), np.where(left, fc, f_new))
    return 0.5 * (a + b)


class BellmanOperator:
    """Bellman map for one (grid, params, interpolation, action search) setting.

    Reward and transition are tabulated on the action grid. With
    ``action_search="refine"`` the grid argmax only brackets the optimum; the
    maximizer is then located exactly inside the neighbouring grid cells.
    Under linear interpolation the objective is concave in theta0, so this is
    the maximum over the whole admissible interval.
    """

    def __init__(self, grid: Grid, params: ModelParams, interpolation: str = "linear",
                 action_search: str = "auto"):
        if interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {interpolation!r}")
        if action_search not in ACTION_SEARCHES:
            raise ValueError(f"unknown action search {action_search!r}")
        self.grid = grid
        self.params = params
        self.interpolation = interpolation
        if action_search == "auto":
            action_search = "refine" if interpolation == "linear" else "grid"
        self.action_search = action_search
        self.refine = action_search == "refine"
        self.gamma = params.gamma
        self.theta0 = grid.effective_actions()
        phi = grid.states[:, None]
        reward = reward_array(phi, self.theta0, params)
        self.next_state = transition_array(phi, self.theta0, params)
        self.idx, self.w = _interp_weights(self.next_state, grid.n_states, interpolation)
        self.mask = grid.admissible_mask()
        reward[~self.mask] = -np.inf
        self.reward = reward
        self._rows = np.arange(grid.n_states)

    def continuation(self, values):
        return (1.0 - self.w) * values[self.idx] + self.w * values[self.idx + 1]

    def q_values(self, values) -> np.ndarray:
        """Q on the action grid, -inf outside each state's window."""
        values = np.asarray(values, dtype=float)
        if self.gamma == 0.0:
            return self.reward.copy()
        return self.reward + self.gamma * self.continuation(values)

    def q_at(self, values, theta0) -> np.ndarray:
        """Q at one (already admissible) threshold per state."""
        phi = self.grid.states
        q = reward_array(phi, theta0, self.params)
        if self.gamma == 0.0:
            return q
        idx, w = _interp_weights(transition_array(phi, theta0, self.params), self.grid.n_states,
                                 self.interpolation)
        return q + self.gamma * ((1.0 - w) * values[idx] + w * values[idx + 1])

    def greedy(self, values):
        """(max Q, maximizing theta0, bracketing grid index) per state.

        Ties within TIE_TOL go to the largest theta0.
        """
        values = np.asarray(values, dtype=float)
        q = self.q_values(values)
        best = q.max(axis=1)
        near = q >= (best - TIE_TOL)[:, None]
        j = q.shape[1] - 1 - np.argmax(near[:, ::-1], axis=1)
        rows = self._rows
        theta = self.theta0[rows, j]
        if not self.refine:
            return best, theta, j
        g = self.grid
        lo = np.where(j > g.window_lo, self.theta0[rows, np.maximum(j - 1, 0)], g.theta_lo)
        hi = np.where(j < g.window_hi, self.theta0[rows, np.minimum(j + 1, g.n_actions - 1)], g.theta_hi)
        lo = np.minimum(lo, theta)
        hi = np.maximum(hi, theta)
        x = golden_max(lambda t: self.q_at(values, t), lo, hi)
        cands = np.stack([lo, x, theta, hi], axis=1)
        cq = np.stack([self.q_at(values, c) for c in cands.T], axis=1)
        top = cq.max(axis=1)
        # largest theta among near-ties
        score = np.where(cq >= (top - TIE_TOL)[:, None], cands, -np.inf)
        pick = np.argmax(score, axis=1)
        return cq[rows, pick], cands[rows, pick], j

    def apply(self, values) -> np.ndarray:
        if not self.refine:
            return self.q_values(values).max(axis=1)
        return self.greedy(values)[0]

    def backup(self, values):
        best, theta, j = self.greedy(values)
        return best, theta

    def evaluate(self, theta0, values, tol, max_iter):
        """Fixed point of the Bellman equation under a fixed threshold per state."""
        phi = self.grid.states
        r = reward_array(phi, theta0, self.params)
        idx, w = _interp_weights(transition_array(phi, theta0, self.params), self.grid.n_states,
                                 self.interpolation)
        v = np.array(values, dtype=float)
        for k in range(1, max_iter + 1):
            v_new = r + self.gamma * ((1.0 - w) * v[idx] + w * v[idx + 1])
            delta = np.max(np.abs(v_new - v))
            v = v_new
            if delta < tol:
                return v, k, True
        return v, max_iter, False


def bellman_backup(values, grid: Grid, params: ModelParams, config: SolverConfig | None = None):
    """One synchronous sweep; returns (new values, greedy grid action indices).

    With refined action search the index is the grid action bracketing the
    exact maximizer.
    """
    config = config or SolverConfig()
    best, _, j = _operator(grid, params, config).greedy(values)
    return best, j


def _operator(grid, params, config):
    return BellmanOperator(grid, params, config.interpolation, config.action_search)


@dataclass(frozen=True, eq=False)
class Solution:
    states: np.ndarray
    values: np.ndarray
    policy_index: np.ndarray  # grid action bracketing the greedy threshold
    policy_theta0: np.ndarray
    policy_theta1: np.ndarray  # NaN at phi0 = 1, where it is unconstrained
    aa_extent: np.ndarray
    aa_raw: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    value_error_bound: float
    method: str = "value-iteration"
    interpolation: str = "linear"
    action_search: str = "auto"
    action_step: float = 0.0
    sigma: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def state_step(self) -> float:
        return 1.0 / (len(self.states) - 1)

    def first_departure(self, tol: float = 1e-9) -> float | None:
        """Smallest grid state whose greedy theta0 is below sigma; None if never.

        State 0 is skipped: there every threshold picks nobody from D.
        """
        below = np.nonzero(self.policy_theta0[1:] < self.sigma - tol)[0]
        return float(self.states[below[0] + 1]) if below.size else None

    def policy_at(self, phi0: float) -> float:
        """Greedy theta0 of the nearest grid state."""
        i = int(np.rint(min(max(phi0, 0.0), 1.0) * (len(self.states) - 1)))
        return float(self.policy_theta0[i])

    def value_at(self, phi0) -> float:
        pos = min(max(float(phi0), 0.0), 1.0) * (len(self.states) - 1)
        i = min(int(math.floor(pos)), len(self.states) - 2)
        w = pos - i
        return float((1.0 - w) * self.values[i] + w * self.values[i + 1])


def extract_solution(values, grid: Grid, params: ModelParams, config: SolverConfig | None = None, *,
                     iterations: int = 0, converged: bool = True,
                     operator: BellmanOperator | None = None) -> Solution:
    config = config or SolverConfig()
    op = operator or _operator(grid, params, config)
    values = np.asarray(values, dtype=float)
    best, theta0, j = op.greedy(values)
    if grid.states[0] == 0.0:
        # nobody to select from D, so every threshold ties; report the largest
        # one that does not rank D above A
        theta0 = theta0.copy()
        theta0[0] = min(theta0[0], params.sigma * (1.0 - params.alpha) + params.tau)
    theta1 = np.clip(theta1_array(grid.states, theta0, params), params.tau, params.sigma + params.tau)
    raw = theta1 - theta0
    at_top = theta0 >= params.sigma - 0.5 * grid.action_step
    # theta0 = sigma picks nobody from D: an equal-threshold pair exists, so no AA
    aa = np.where(at_top, 0.0, np.maximum(raw, 0.0))
    aa = np.where(np.isnan(raw), np.nan, aa)
    g = params.gamma
    residual = float(np.max(np.abs(values - best)))
    bound = config.tolerance * g / (1.0 - g)
    return Solution(grid.states.copy(), values.copy(), j, theta0, theta1, aa, raw, iterations, residual,
                    converged, bound, config.method, config.interpolation, op.action_search,
                    grid.action_step, params.sigma)


def value_iteration(grid: Grid, params: ModelParams, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    op = _operator(grid, params, config)
    v = np.zeros(grid.n_states)
    converged = False
    delta = math.inf
    k = 0
    for k in range(1, config.max_iterations + 1):
        v_new = op.apply(v)
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        if delta < config.tolerance:
            converged = True
            break
    if not converged:
        log.warning("value iteration stopped at %d iterations (last change %.3g)", k, delta)
    return extract_solution(v, grid, params, config, iterations=k, converged=converged, operator=op)


def policy_iteration(grid: Grid, params: ModelParams, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    op = _operator(grid, params, config)
    v = np.zeros(grid.n_states)
    _, policy, _ = op.greedy(v)
    converged = False
    eval_sweeps = 0
    k = 0
    for k in range(1, config.max_iterations + 1):
        v, n_eval, ok = op.evaluate(policy, v, config.eval_tolerance, config.eval_max_iterations)
        eval_sweeps += n_eval
        best, candidate, _ = op.greedy(v)
        # keep the incumbent wherever it is still (tied for) best; avoids cycling
        keep = op.q_at(v, policy) >= best - TIE_TOL
        if ok and keep.all():
            converged = True
            break
        policy = np.where(keep, policy, candidate)
    if not converged:
        log.warning("policy iteration stopped at %d improvement steps", k)
    sol = extract_solution(v, grid, params, config, iterations=k, converged=converged, operator=op)
    sol.extras["evaluation_sweeps"] = eval_sweeps
    return sol


def solve(params: ModelParams, config: SolverConfig | None = None, grid: Grid | None = None) -> Solution:
    config = config or SolverConfig()
    grid = grid or build_grid(config, params)
    if config.method == "policy-iteration":
        return policy_iteration(grid, params, config)
    return value_iteration(grid, params, config)


def bellman_residual(solution: Solution, grid: Grid, params: ModelParams, values=None) -> float:
    """Sup-norm distance between a value table and its Bellman image."""
    op = BellmanOperator(grid, params, solution.interpolation, solution.action_search)
    v = solution.values if values is None else np.asarray(values, dtype=float)
    return float(np.max(np.abs(v - op.apply(v))))
