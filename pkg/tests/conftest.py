import numpy as np
import pytest

from critflow.field import SpectralField
from critflow.grid import make_grid
from critflow.spectral import random_divfree_field, random_scalar_field, shell_profile

SHELLS = shell_profile((1, 2, 3, 4))


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 32)


@pytest.fixture(scope="session")
def grid3_small():
    return make_grid(3, 16)


@pytest.fixture(scope="session")
def grid2():
    return make_grid(2, 32)


def divfree(grid, seed, shells=SHELLS):
    return random_divfree_field(grid, shells, seed)


def scalar(grid, seed, shells=SHELLS):
    return random_scalar_field(grid, shells, seed)


def from_function(grid, fn):
    """Field sampled from ``fn(*coordinates)``; ``fn`` returns one array per component."""
    vals = np.asarray(fn(*grid.coordinates()), dtype=float)
    if vals.shape == grid.shape:
        vals = vals[None]
    return SpectralField.from_physical(grid, vals)


def sin_mode(grid, k=1, axis=0, component=1):
    """Vector field ``sin(k x_axis) e_component`` (divergence-free when ``axis != component``)."""
    x = grid.coordinates()[axis]
    vals = np.zeros((grid.d,) + grid.shape)
    vals[component] = np.sin(k * x)
    return SpectralField.from_physical(grid, vals)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="session")
def th1_constant(grid3):
    """Fifty-pair bilinear constant for the Th1 family (d = 3, q = 3) at T = 1, seed 1."""
    from critflow.families import IndexFamily
    from critflow.solver import estimate_bilinear_constant

    return estimate_bilinear_constant(IndexFamily.th1(3, 3), 50, 1, grid3, 1.0)


#: One line per acceptance criterion, filled in by ``test_acceptance.py``.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
