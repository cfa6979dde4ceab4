import numpy as np
import pytest

from twofluid.integrator import RunConfig, run
from twofluid.model import PhysParams
from twofluid.spectral_field import GridSpec

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(2, 32)


@pytest.fixture(scope="session")
def params2d():
    return PhysParams.for_dim(2, 2.0)


@pytest.fixture(scope="session")
def canonical_run(grid32, params2d):
    """Small-data run: grid 32^2, gamma = 2, amplitude 1e-3, T = 20."""
    return run(RunConfig(grid32, params2d, 20.0, cfl=0.5, amplitude=1e-3, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
