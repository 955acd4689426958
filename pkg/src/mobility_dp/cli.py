"""mobility-dp command line.

    mobility-dp <analytic|solve|simulate|sweep|validate> [--config PATH] [--out DIR] ...

Flags override the matching config fields. Exit codes: 0 success, 1 config
error, 2 invariant failure, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic, validation
from .config import GAMMA_NOTE, RunConfig, load_config, parse_config
from .errors import ConfigError, Undefined
from .output import write_json, write_table
from .simulator import McConfig, absorbing_map, mc_rollout, rollout
from .solver import METHODS, INTERPOLATIONS, build_grid, solve

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NONCONVERGED = 0, 1, 2, 3
COMMANDS = ("analytic", "solve", "simulate", "sweep", "validate")


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors here; 2 is reserved for failed invariants
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mobility-dp", description="Opportunity allocation under intergenerational mobility.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration (built-in defaults if omitted)")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="Monte Carlo seed; enables the agent simulation in 'simulate'")
    p.add_argument("--grid-states", type=int)
    p.add_argument("--grid-actions", type=int)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--interp", choices=INTERPOLATIONS)
    p.add_argument("--inject-fault", action="store_true",
                   help="validate only: corrupt the value table to exercise the residual check")
    return p


def apply_overrides(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    if not isinstance(doc, dict):
        return doc  # parse_config reports it

    def block(name):
        b = doc.setdefault(name, {})
        if not isinstance(b, dict):
            raise ConfigError(name, "expected an object")
        return b

    if args.out is not None:
        block("output")["directory"] = args.out
    for flag, key in (("grid_states", "n_states"), ("grid_actions", "n_actions"),
                      ("method", "method"), ("interp", "interpolation")):
        value = getattr(args, flag)
        if value is not None:
            block("solver")[key] = value
    if args.seed is not None:
        sim = block("simulate")
        if not isinstance(sim.get("mc"), dict):
            sim["mc"] = {}
        sim["mc"]["seed"] = args.seed
    return doc


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.9g}"


def _solve(cfg: RunConfig):
    grid = build_grid(cfg.solver, cfg.model)
    return grid, solve(cfg.model, cfg.solver, grid)


def _tipping_summary(sol, params) -> dict:
    phi_star = analytic.tipping_point(params).phi_star
    dep = sol.first_departure()
    gap = None if dep is None else abs(dep - phi_star) / sol.state_step
    return {"phi_star": phi_star, "first_departure": dep, "gap_state_steps": gap,
            "within_2_steps": gap is not None and gap <= 2.0 + 1e-9}


def _boundaries(params, sigma):
    try:
        b = analytic.regime_boundaries(params.alpha, params.tau, params.gamma, sigma)
    except Undefined as exc:
        return {"error": str(exc)}
    return {"gamma_star": b.gamma_star, "tau_star": b.tau_star, "alpha_star": b.alpha_star,
            "sigma": b.assumption_sigma}


def cmd_analytic(cfg: RunConfig, out: Path) -> int:
    p = cfg.model
    rep = analytic.tipping_point(p)
    phis = np.linspace(0.0, 1.0, 11)
    sigma_phis = np.linspace(0.0, rep.phi_star, 5) if rep.phi_star > 0 else np.array([0.0])
    payload = {
        "params": p.as_dict(),
        "phi_star": rep.phi_star,
        "raw_phi_tilde": rep.raw_phi_tilde,
        "clamped_low": rep.clamped_low,
        "clamped_high": rep.clamped_high,
        "persistent": rep.persistent,
        "boundaries_sigma_one_minus_tau": _boundaries(p, None),
        "boundaries_config_sigma": _boundaries(p, p.sigma),
        "aa_line": [{"phi0": float(x), "theta0": analytic.aa_line(float(x), p)} for x in phis],
        "sigma_region_value": [{"phi0": float(x), "value": analytic.sigma_region_value(float(x), p)}
                               for x in sigma_phis],
    }
    if cfg.gamma_is_default:
        payload["gamma_note"] = GAMMA_NOTE
    write_json(out / "analytic.json", payload)
    print(f"phi_star={_fmt(rep.phi_star)} raw={_fmt(rep.raw_phi_tilde)} persistent={str(rep.persistent).lower()}"
          f" clamped_low={str(rep.clamped_low).lower()} clamped_high={str(rep.clamped_high).lower()}")
    for key, value in payload["boundaries_sigma_one_minus_tau"].items():
        print(f"{key}={value if isinstance(value, str) else _fmt(value)}")
    if cfg.gamma_is_default:
        print(f"note: {GAMMA_NOTE}")
    return EXIT_OK


def _write_policy(sol, cfg, out):
    rows = zip(sol.states, sol.policy_theta0, sol.policy_theta1, sol.aa_extent, sol.values)
    write_table(out, "policy", ["phi0", "theta0", "theta1", "aa_extent", "value"], rows, cfg.output)


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    grid, sol = _solve(cfg)
    _write_policy(sol, cfg, out)
    report = {
        "params": cfg.model.as_dict(),
        "method": sol.method,
        "interpolation": sol.interpolation,
        "action_search": sol.action_search,
        "n_states": grid.n_states,
        "n_actions": grid.n_actions,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "final_residual": sol.final_residual,
        "value_error_bound": sol.value_error_bound,
        "tipping": _tipping_summary(sol, cfg.model),
        **sol.extras,
    }
    if cfg.gamma_is_default:
        report["gamma_note"] = GAMMA_NOTE
    write_json(out / "solve_report.json", report)
    print(f"iterations={sol.iterations} converged={str(sol.converged).lower()} residual={sol.final_residual:.3e}")
    t = report["tipping"]
    print(f"phi_star={_fmt(t['phi_star'])} first_departure={_fmt(t['first_departure'])}")
    if not sol.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    p, sim = cfg.model, cfg.simulate
    _, sol = _solve(cfg)
    traj = rollout(sim.phi0_init, sol, p, sim.horizon)
    rows = ((s.t, s.phi0, s.theta0, s.theta1, s.reward, s.discounted_cumulative) for s in traj.steps)
    write_table(out, "trajectory", ["t", "phi0", "theta0", "theta1", "reward", "discounted_cum"], rows, cfg.output)
    init = np.linspace(0.0, 1.0, sim.absorbing_states)
    absorbing = absorbing_map(init, sol, p, sim.absorbing_horizon)
    rows = ((a.phi0_init, a.phi0_absorbing, a.settled) for a in absorbing)
    write_table(out, "absorbing", ["phi0_init", "phi0_absorbing", "settled"], rows, cfg.output)
    print(f"final_phi0={_fmt(traj.final_phi0)} discounted_return={_fmt(traj.steps[-1].discounted_cumulative)}"
          f" tail_bound={traj.tail_bound:.3e} clamp_events={traj.clamp_events}")
    if sim.mc is not None:
        report = mc_rollout(sim.phi0_init, sol, p, sim.mc)
        write_json(out / "mc_report.json", report.to_dict())
        print(f"mc fraction |z|>3: {report.fraction_beyond(3.0):.3f}")
    if not sol.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _axes(cfg: RunConfig):
    given = {a.name: a.values() for a in cfg.sweep}
    m = cfg.model
    return tuple(given.get(name, np.array([getattr(m, name)])) for name in ("alpha", "tau", "gamma"))


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    alphas, taus, gammas = _axes(cfg)
    lattice = validation.classify_lattice(alphas, taus, gammas)
    write_table(out, "regions", ["alpha", "tau", "gamma", "phi_star", "persistent"],
                (row[:5] for row in lattice), cfg.output)
    write_table(out, "gamma_star", ["alpha", "tau", "gamma_star"],
                ((a, t, analytic.gamma_star(a, t, 1.0 - t)) for a in alphas for t in taus), cfg.output)
    write_table(out, "tau_star", ["alpha", "gamma", "tau_star"],
                ((a, g, analytic.tau_star(a, g) if g > 0 else math.nan) for a in alphas for g in gammas),
                cfg.output)
    write_table(out, "alpha_star", ["tau", "gamma", "alpha_star"],
                ((t, g, analytic.alpha_star(t, g, 1.0 - t)) for t in taus for g in gammas), cfg.output)
    n_persistent = sum(1 for row in lattice if row[4])
    print(f"lattice points={len(lattice)} persistent={n_persistent}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path, inject_fault: bool = False) -> int:
    grid, sol = _solve(cfg)
    if inject_fault:
        sol = validation.corrupt(sol)
    checks = validation.run_validation(cfg.model, sol, grid, phi0_init=cfg.simulate.phi0_init,
                                       mc=cfg.simulate.mc or McConfig(), sweep_axes=_axes(cfg))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    write_json(out / "validate_report.json", {
        "params": cfg.model.as_dict(),
        "converged": sol.converged,
        "fault_injected": inject_fault,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
    })
    if not all(c.passed for c in checks):
        return EXIT_INVARIANT
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config) if args.config else {}
        cfg = parse_config(apply_overrides(doc, args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.output.directory)
    if args.command == "validate":
        return cmd_validate(cfg, out, args.inject_fault)
    return {"analytic": cmd_analytic, "solve": cmd_solve, "simulate": cmd_simulate,
            "sweep": cmd_sweep}[args.command](cfg, out)


if __name__ == "__main__":
    sys.exit(main())
