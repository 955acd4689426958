"""Run configuration: a strict JSON document with model/solver/simulate/sweep/output blocks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ModelError
from .model import ModelParams
from .simulator import McConfig
from .solver import SolverConfig

DEFAULT_MODEL = {"alpha": 0.15, "sigma": 0.40, "tau": 0.10, "gamma": 0.90, "p_a": 0.0, "p_d": 0.0}
GAMMA_NOTE = "gamma=0.90 is a default choice of this tool, not a published value"
SWEEP_AXES = ("alpha", "tau", "gamma")
BLOCKS = ("model", "solver", "simulate", "sweep", "output")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    min: float
    max: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


DEFAULT_SWEEP = (
    SweepAxis("alpha", 0.05, 0.5, 20),
    SweepAxis("tau", 0.05, 0.5, 20),
    SweepAxis("gamma", 0.05, 0.95, 20),
)


@dataclass(frozen=True)
class SimulateConfig:
    phi0_init: float = 0.5
    horizon: int = 1000
    absorbing_states: int = 101
    absorbing_horizon: int = 1000
    mc: Optional[McConfig] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    format: str = "csv"
    precision: int = 9


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    sweep: tuple = DEFAULT_SWEEP
    output: OutputConfig = field(default_factory=OutputConfig)
    gamma_is_default: bool = True


def _expect_dict(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return value


def _check_keys(block: dict, allowed, path):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, f"not finite: {value!r}")
    return float(value)


def _integer(value, path, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


def _parse_model(block):
    block = _expect_dict(block, "model")
    _check_keys(block, DEFAULT_MODEL, "model")
    raw = {**DEFAULT_MODEL, **block}
    for key, value in raw.items():
        _number(value, f"model.{key}")
    try:
        return ModelParams(**raw)
    except ModelError as exc:
        raise ConfigError(f"model.{getattr(exc, 'field', '')}".rstrip("."), str(exc)) from None


def _parse_solver(block):
    block = _expect_dict(block, "solver")
    _check_keys(block, [f.name for f in fields(SolverConfig)], "solver")
    return SolverConfig(**block)


def _parse_simulate(block):
    block = _expect_dict(block, "simulate")
    _check_keys(block, [f.name for f in fields(SimulateConfig)], "simulate")
    out = {}
    if "phi0_init" in block:
        phi = _number(block["phi0_init"], "simulate.phi0_init")
        if not 0.0 <= phi <= 1.0:
            raise ConfigError("simulate.phi0_init", "must lie in [0, 1]")
        out["phi0_init"] = phi
    for key, minimum in (("horizon", 1), ("absorbing_states", 2), ("absorbing_horizon", 10)):
        if key in block:
            out[key] = _integer(block[key], f"simulate.{key}", minimum)
    if block.get("mc") is not None:
        mc = _expect_dict(block["mc"], "simulate.mc")
        _check_keys(mc, [f.name for f in fields(McConfig)], "simulate.mc")
        n = _integer(mc.get("n_agents", McConfig.n_agents), "simulate.mc.n_agents", 1000)
        gens = _integer(mc.get("generations", McConfig.generations), "simulate.mc.generations", 1)
        seed = _integer(mc.get("seed", McConfig.seed), "simulate.mc.seed", 0)
        if seed >= 2 ** 64:
            raise ConfigError("simulate.mc.seed", "must fit in 64 bits")
        out["mc"] = McConfig(n, gens, seed)
    return SimulateConfig(**out)


def _parse_sweep(block):
    block = _expect_dict(block, "sweep")
    _check_keys(block, ["axes"], "sweep")
    axes = block.get("axes", [])
    if not isinstance(axes, list):
        raise ConfigError("sweep.axes", "expected a list")
    parsed = {}
    for i, axis in enumerate(axes):
        path = f"sweep.axes[{i}]"
        axis = _expect_dict(axis, path)
        _check_keys(axis, ["name", "min", "max", "count"], path)
        missing = [k for k in ("name", "min", "max", "count") if k not in axis]
        if missing:
            raise ConfigError(f"{path}.{missing[0]}", "required")
        name = axis["name"]
        if name not in SWEEP_AXES:
            raise ConfigError(f"{path}.name", f"expected one of {SWEEP_AXES}")
        if name in parsed:
            raise ConfigError(f"{path}.name", f"duplicate axis {name!r}")
        lo, hi = _number(axis["min"], f"{path}.min"), _number(axis["max"], f"{path}.max")
        count = _integer(axis["count"], f"{path}.count", 1)
        if lo > hi:
            raise ConfigError(f"{path}.min", "min exceeds max")
        low_ok = lo >= 0.0 if name == "gamma" else lo > 0.0
        if not low_ok or hi >= 1.0:
            raise ConfigError(path, f"{name} axis must lie inside its parameter range")
        parsed[name] = SweepAxis(name, lo, hi, count)
    return tuple(parsed[n] for n in SWEEP_AXES if n in parsed)


def _parse_output(block):
    block = _expect_dict(block, "output")
    _check_keys(block, [f.name for f in fields(OutputConfig)], "output")
    out = {}
    if "directory" in block:
        if not isinstance(block["directory"], str) or not block["directory"]:
            raise ConfigError("output.directory", "expected a non-empty string")
        out["directory"] = block["directory"]
    if "format" in block:
        if block["format"] not in ("csv", "json"):
            raise ConfigError("output.format", "expected 'csv' or 'json'")
        out["format"] = block["format"]
    if "precision" in block:
        precision = _integer(block["precision"], "output.precision", 1)
        if precision > 17:
            raise ConfigError("output.precision", "must be <= 17")
        out["precision"] = precision
    return OutputConfig(**out)


def parse_config(doc: dict) -> RunConfig:
    """Validate every block before anything runs; raises `ConfigError`."""
    doc = _expect_dict(doc, "<root>")
    _check_keys(doc, BLOCKS, "")
    model_block = doc.get("model", {})
    model = _parse_model(model_block)
    solver = _parse_solver(doc.get("solver", {}))
    simulate = _parse_simulate(doc.get("simulate", {}))
    sweep = _parse_sweep(doc["sweep"]) if "sweep" in doc else DEFAULT_SWEEP
    output = _parse_output(doc.get("output", {}))
    gamma_default = isinstance(model_block, dict) and "gamma" not in model_block
    return RunConfig(model, solver, simulate, sweep, output, gamma_default)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
