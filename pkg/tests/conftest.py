import numpy as np
import pytest

from fraclab import (
    FracPower,
    assemble,
    build_interval_grid,
    build_rectangle_grid,
    eigendecompose,
)


@pytest.fixture(scope="session")
def interval_dec():
    """(0, pi), A = 1, 256 cells."""
    grid = build_interval_grid(0.0, np.pi, 256)
    return eigendecompose(assemble(grid))


@pytest.fixture(scope="session")
def small_dec():
    """(0, pi), A = 1, 64 cells; cheap enough for extension solves."""
    grid = build_interval_grid(0.0, np.pi, 64)
    return eigendecompose(assemble(grid))


@pytest.fixture(scope="session")
def rect_dec():
    grid = build_rectangle_grid(0.0, np.pi, 0.0, np.pi, 12, 12)
    return eigendecompose(assemble(grid))


@pytest.fixture(scope="session")
def frac_powers(small_dec):
    return {s: FracPower(s, small_dec) for s in (0.25, 0.5, 0.75)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
