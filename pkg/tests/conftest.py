import numpy as np
import pytest
from hypothesis import settings

from artifact.ansatz import AngularData
from artifact.field_core import PolarGrid
from artifact.matter import build_sources, gaussian_matter
from artifact.solver import fixed_point

settings.register_profile("artifact", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("artifact")

TWO_TERMS = [{"which": "gamma", "center": (0.2, 0.4)}, {"which": "gamma_dot", "center": (0.5, 0.0)}]


def two_term_sources(grid, a):
    return build_sources(gaussian_matter(grid, a, TWO_TERMS))


@pytest.fixture(scope="session")
def grid():
    return PolarGrid(256, 64)


@pytest.fixture(scope="session")
def small_grid():
    return PolarGrid(128, 32)


@pytest.fixture(scope="session")
def gaussian_run(grid):
    src = two_term_sources(grid, 0.05)
    return fixed_point(grid, AngularData(), src), src


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
