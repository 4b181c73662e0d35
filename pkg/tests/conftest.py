import numpy as np
import pytest

from chemofluid.grid import ScalarField, VectorField, make_grid


@pytest.fixture
def grid2d():
    return make_grid(2, (1.0, 1.0), (32, 32))


@pytest.fixture
def grid2d_small():
    return make_grid(2, (1.0, 1.0), (16, 16))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_scalar(grid, rng, scale=1.0, offset=0.0):
    return ScalarField(grid, offset + scale * rng.standard_normal(grid.shape))


def random_vector(grid, rng, scale=1.0):
    comps = [scale * rng.standard_normal(grid.face_shape(d)) for d in range(grid.dim)]
    return VectorField(grid, comps).zero_wall_normal()
