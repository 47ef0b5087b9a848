"""Shared fixtures and hypothesis settings."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from degenfb.fields import Grid, ScalarField
from degenfb.geometry import StarDomain

settings.register_profile(
    "degenfb", deadline=None, max_examples=30, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("degenfb")


@pytest.fixture(scope="session")
def ball():
    return StarDomain.ball(1.0)


@pytest.fixture(scope="session")
def ellipse():
    return StarDomain.ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def grid64():
    return Grid.box(1.0, 64)


def field(grid: Grid, func) -> ScalarField:
    """Field from ``func(points)`` with box-edge Dirichlet mask."""
    return ScalarField.from_function(grid, func, grid.box_edge_mask())


def cone(grid: Grid, nu, slope: float = 1.0, shift: float = 0.0) -> ScalarField:
    nu = np.asarray(nu, dtype=float)
    return field(grid, lambda x: slope * np.maximum(x @ nu + shift, 0.0))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
