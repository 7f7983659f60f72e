import pytest

from bosekinetic.collision import build_tables
from bosekinetic.core import ModelParams, build_grid
from bosekinetic.driver import Model
from bosekinetic.spectral import build_kernel_basis


@pytest.fixture(scope="session")
def small_params():
    return ModelParams(n_axial=13, n_radial=10, n_modes=3)


@pytest.fixture(scope="session")
def small_grid(small_params):
    return build_grid(small_params)


@pytest.fixture(scope="session")
def small_tables(small_grid):
    return build_tables(small_grid)


@pytest.fixture(scope="session")
def small_basis(small_grid):
    return build_kernel_basis(small_grid)


@pytest.fixture(scope="session")
def small_model(small_params):
    return Model.build(small_params)


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams()


@pytest.fixture(scope="session")
def ref_tables(ref_params):
    return build_tables(build_grid(ref_params))


@pytest.fixture(scope="session")
def ref_basis(ref_tables):
    return build_kernel_basis(ref_tables.grid)
