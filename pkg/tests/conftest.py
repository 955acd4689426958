from __future__ import annotations

from pathlib import Path

import pytest

from mobility_dp.model import ModelParams
from mobility_dp.solver import SolverConfig, build_grid, solve

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def params():
    return ModelParams(0.15, 0.4, 0.1, 0.9)


@pytest.fixture(scope="session")
def default_run(params):
    """Value iteration on the full 1001 x 1001 grid at the default parameters."""
    cfg = SolverConfig()
    grid = build_grid(cfg, params)
    return grid, solve(params, cfg, grid)


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS


# -- acceptance report -----------------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Store one criterion outcome; the summary hook prints them in order."""
    def _record(number: int, name: str, passed: bool, detail: str):
        ACCEPTANCE[number] = (name, bool(passed), detail)
        print(f"criterion {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {name}: {detail}")
