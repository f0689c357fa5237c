import numpy as np
import pytest

from degcascade.coefficients import DegeneracyModel
from degcascade.forward import RatePack
from degcascade.mesh import TensorGrid
from degcascade.presets import canonical

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def small():
    """T=2, A=1 on a 16 x 8 x 12 lattice with the canonical rates."""
    grid = TensorGrid.aligned_grid(2.0, 1.0, 8, 12)
    k1 = DegeneracyModel.power_at_0(0.5)
    k2 = DegeneracyModel.power_at_0(0.7)
    rates = RatePack.constant(grid)
    return grid, k1, k2, rates


@pytest.fixture(scope="session")
def canon():
    return canonical()


def random_slice(rng, grid, last_age_zero=False):
    s = np.zeros((grid.Na + 1, grid.Nx + 1))
    s[:, 1:-1] = rng.standard_normal((grid.Na + 1, grid.Nx - 1))
    if last_age_zero:
        s[-1] = 0.0
    return s
