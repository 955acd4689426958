"""Cross-checks between the closed forms, the solver, the rollouts and the agent simulation."""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass

import numpy as np

from . import analytic
from .model import ModelParams, admissible_range, period_reward, transition_post
from .simulator import McConfig, absorbing_map, discounted_return, mc_rollout, rollout, tail_bound
from .solver import Grid, Solution, bellman_residual

FD_STEP = 1e-5


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def monotone_excess(x, increasing: bool = False) -> float:
    """Largest amount by which ``x`` falls short of being monotone (NaNs skipped)."""
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return 0.0
    if increasing:
        return float(np.max(np.maximum.accumulate(x) - x))
    return float(np.max(x - np.minimum.accumulate(x)))


def tipping_check(sol: Solution, params: ModelParams, max_steps: float = 2.0) -> Check:
    phi_star = analytic.tipping_point(params).phi_star
    dep = sol.first_departure()
    if dep is None:
        ok = phi_star >= 1.0 - params.alpha - max_steps * sol.state_step
        return Check("tipping-point", ok, f"no departure; phi_star={phi_star:.6f}")
    gap = abs(dep - phi_star) / sol.state_step
    return Check("tipping-point", gap <= max_steps + 1e-9,
                 f"departure={dep:.6f} phi_star={phi_star:.6f} gap={gap:.2f} steps")


def sigma_region_check(sol: Solution, params: ModelParams, tol: float = 5e-3) -> Check:
    phi_star = analytic.tipping_point(params).phi_star
    mask = sol.states < phi_star - 2 * sol.state_step
    if not mask.any():
        return Check("sigma-region-value", True, "no states below the tipping point")
    closed = np.array([analytic.sigma_region_value(p, params) for p in sol.states[mask]])
    err = float(np.max(np.abs(sol.values[mask] - closed)))
    return Check("sigma-region-value", err <= tol, f"max abs error {err:.3e} over {mask.sum()} states")


def residual_check(sol: Solution, grid: Grid, params: ModelParams, tol: float = 1e-7) -> Check:
    res = bellman_residual(sol, grid, params)
    return Check("bellman-residual", res <= tol, f"sup-norm residual {res:.3e} (limit {tol:.1e})")


def structural_checks(sol: Solution, params: ModelParams) -> list[Check]:
    step = sol.action_step
    v = sol.values
    checks = [
        Check("value-decreasing", bool(np.all(np.diff(v) <= 1e-9)), f"max increase {np.max(np.diff(v)):.3e}"),
        Check("value-concave", bool(np.max(np.diff(v, 2)) <= 1e-7), f"max second difference {np.max(np.diff(v, 2)):.3e}"),
    ]
    ex = monotone_excess(sol.policy_theta0)
    checks.append(Check("policy-decreasing", ex <= step, f"excess {ex / step:.3f} action steps"))
    ex = monotone_excess(sol.aa_extent, increasing=True)
    checks.append(Check("aa-extent-increasing", ex <= step, f"excess {ex / step:.3f} action steps"))
    gap = sol.policy_theta0 - sol.policy_theta1
    worst = float(np.nanmax(gap))
    checks.append(Check("weak-affirmative-action", worst <= step, f"max theta0-theta1 {worst:.3e}"))
    return checks


def absorbing_checks(sol: Solution, params: ModelParams, n_initial: int = 101, horizon: int = 1000) -> list[Check]:
    phi_star = analytic.tipping_point(params).phi_star
    init = np.linspace(0.0, 1.0, n_initial)
    res = absorbing_map(init, sol, params, horizon)
    final = np.array([r.phi0_absorbing for r in res])
    floor = phi_star - 2 * sol.state_step
    above = init >= floor
    low = float(np.min(final[above])) if above.any() else float("nan")
    below = init < phi_star
    drift = float(np.max(np.abs(final[below] - init[below]))) if below.any() else 0.0
    return [
        Check("absorbing-floor", bool(np.all(final[above] >= floor - 1e-12)),
              f"lowest absorbing state from above the floor {low:.6f} vs floor {floor:.6f}"),
        Check("absorbing-fixed-points", drift <= 1e-9, f"max drift below tipping point {drift:.3e}"),
    ]


def return_check(sol: Solution, params: ModelParams, n_points: int = 10, horizon: int = 400,
                 seed: int = 0, tol: float = 1e-3) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    bound = tail_bound(params, horizon)
    for phi in rng.uniform(0.0, 1.0, n_points):
        ret = discounted_return(rollout(phi, sol, params, horizon), params.gamma)
        worst = max(worst, abs(ret - sol.value_at(phi)))
    return Check("return-consistency", worst <= tol + bound, f"max gap {worst:.3e} (limit {tol + bound:.3e})")


def mc_check(sol: Solution, params: ModelParams, phi0_init: float, mc: McConfig, budget: float = 0.02) -> Check:
    report = mc_rollout(phi0_init, sol, params, mc)
    frac = report.fraction_beyond(3.0)
    return Check("monte-carlo-z", frac <= budget,
                 f"{frac:.1%} of {report.z_scores().size} statistics beyond |z|=3 (N={mc.n_agents}, seed={mc.seed})")


def derivative_checks(params: ModelParams, n_points: int = 100, seed: int = 0, rel: float = 1e-6) -> list[Check]:
    rng = np.random.default_rng(seed)
    h = FD_STEP
    worst_r = worst_s = 0.0
    for _ in range(n_points):
        phi = rng.uniform(0.01, 0.99)
        window = admissible_range(phi, params)
        if window.hi - window.lo < 4 * h:
            continue
        th = rng.uniform(window.lo + h, window.hi - h)
        fd = (period_reward(phi, th + h, params) - period_reward(phi, th - h, params)) / (2 * h)
        an = analytic.reward_dtheta(phi, th, params)
        worst_r = max(worst_r, abs(fd - an) / max(abs(an), 1e-3))
        fd = (transition_post(phi, th + h, params) - transition_post(phi, th - h, params)) / (2 * h)
        an = analytic.transition_dtheta(phi, th, params)
        worst_s = max(worst_s, abs(fd - an) / max(abs(an), 1e-3))
    checks = [
        Check("d-reward", worst_r <= rel, f"max relative error {worst_r:.2e}"),
        Check("d-transition", worst_s <= rel, f"max relative error {worst_s:.2e}"),
    ]
    report = analytic.tipping_point(params)
    if report.phi_star > 2 * h:
        worst_v = 0.0
        for phi in rng.uniform(h, report.phi_star - h, n_points):
            fd = (analytic.sigma_region_value(phi + h, params) - analytic.sigma_region_value(phi - h, params)) / (2 * h)
            an = analytic.sigma_region_value_derivative(phi, params)
            worst_v = max(worst_v, abs(fd - an) / abs(an))
        checks.append(Check("d-value", worst_v <= rel, f"max relative error {worst_v:.2e}"))
    raw = report.raw_phi_tilde
    if 0.0 < raw < 1.0 - params.alpha:
        r = analytic.foc_residual(raw, params)
        checks.append(Check("foc-root", abs(r) <= 1e-10, f"residual {r:.2e} at phi={raw:.6f}"))
    return checks


def classify_lattice(alphas, taus, gammas):
    """Persistent flags from the tipping point and from each boundary, sigma = 1 - tau.

    Returns a list of (alpha, tau, gamma, phi_star, persistent, by_gamma, by_tau, by_alpha, margin)
    where ``by_*`` is None when that boundary does not apply and ``margin`` is
    the distance of the raw tipping value from zero.
    """
    rows = []
    for a, t, g in itertools.product(alphas, taus, gammas):
        a, t, g = float(a), float(t), float(g)
        s = 1.0 - t
        rep = analytic.tipping_point(ModelParams(a, s, t, g))
        by_gamma = g >= analytic.gamma_star(a, t, s)
        by_tau = t <= analytic.tau_star(a, g) if g > 0.0 else None
        by_alpha = a >= analytic.alpha_star(t, g, s)
        rows.append((a, t, g, rep.phi_star, rep.persistent, by_gamma, by_tau, by_alpha, abs(rep.raw_phi_tilde)))
    return rows


def boundary_check(alphas, taus, gammas, tie: float = 1e-9) -> Check:
    bad = 0
    for row in classify_lattice(alphas, taus, gammas):
        persistent, margin = row[4], row[8]
        if margin <= tie:
            continue
        bad += sum(1 for flag in row[5:8] if flag is not None and flag != persistent)
    n = len(alphas) * len(taus) * len(gammas)
    return Check("regime-boundaries", bad == 0, f"{bad} misclassified of {n} lattice points")


def corrupt(sol: Solution, amount: float = 1e-3) -> Solution:
    """Fault injection: bump one entry of the value table."""
    values = sol.values.copy()
    values[len(values) // 2] += amount
    return dataclasses.replace(sol, values=values)


def run_validation(params: ModelParams, sol: Solution, grid: Grid, *, phi0_init: float = 0.5,
                   mc: McConfig | None = None, sweep_axes=None) -> list[Check]:
    checks = [tipping_check(sol, params), sigma_region_check(sol, params),
              residual_check(sol, grid, params)]
    if params.p_a <= params.p_d:
        checks += structural_checks(sol, params)
        checks += absorbing_checks(sol, params)
    checks.append(return_check(sol, params))
    checks.append(mc_check(sol, params, phi0_init, mc or McConfig()))
    checks += derivative_checks(params)
    if sweep_axes:
        checks.append(boundary_check(*sweep_axes))
    return checks
