import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clarkedp import (CRRA, CobbDouglas, Grid, RCKSpec, ReducedFormModel, TechnologySpec,
                      build_rck, extract_policy, kinked_utility, solve_value_iteration)

A, DELTA = 0.3, 0.95


def log_cd_model():
    return build_rck(RCKSpec(CRRA(1.0), TechnologySpec(CobbDouglas(A), 1.0), DELTA))


def kinked_model():
    return build_rck(RCKSpec(kinked_utility(0.5, 2.0, 1.0), TechnologySpec(CobbDouglas(A), 1.0), DELTA))


def jump_model():
    """Two peaks at y = -1 and y = +1 whose heights cross at x = 0."""
    return ReducedFormModel(0.05, lambda x, y: -(y**2 - 1) ** 2 + x * y,
                            lambda x: 0 * x - 2.0, lambda x: 0 * x + 2.0, (-2.0, 2.0), name="jump")


class Solved:
    def __init__(self, model, grid):
        self.model = model
        self.V, self.report = solve_value_iteration(model, grid)
        self.G = extract_policy(model, self.V)


@pytest.fixture(scope="session")
def log_cd_400():
    return Solved(log_cd_model(), Grid.uniform(0.02, 1.05, 400))


@pytest.fixture(scope="session")
def log_cd_fine():
    """Knots uniform in 1/k so the PL interpolant resolves V'' = -B/k^2 evenly."""
    return Solved(log_cd_model(), Grid.reciprocal(0.15, 1.05, 1600))


@pytest.fixture(scope="session")
def kinked_fine():
    return Solved(kinked_model(), Grid.reciprocal(0.1, 1.05, 2000))


@pytest.fixture(scope="session")
def jump_solved():
    return Solved(jump_model(), Grid.uniform(-2.0, 2.0, 400))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        terminalreporter.write_line(mod.RESULTS.get(
            n, f"NOT RUN criterion {n}: no result recorded (deselected or errored early)"))
