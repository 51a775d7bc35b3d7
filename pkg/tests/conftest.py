import numpy as np
import pytest

from dipolesmooth.geometry import build_grid, build_sensor_cap, sarvas_leadfield
from dipolesmooth.model import (
    DipoleModel,
    LocationKernel,
    ModelParams,
    isotropic_noise_cov,
)


@pytest.fixture(scope="session")
def desk_grid():
    return build_grid(0.09, 0.015, 0.01)


@pytest.fixture(scope="session")
def desk_sensors():
    return build_sensor_cap(60, 0.12)


@pytest.fixture(scope="session")
def desk_leadfield(desk_grid, desk_sensors):
    return sarvas_leadfield(desk_grid, desk_sensors)


# a 27-point grid with few sensors keeps model-level tests fast
@pytest.fixture(scope="session")
def small_grid():
    return build_grid(0.09, 0.05, 0.0)


@pytest.fixture(scope="session")
def small_sensors():
    return build_sensor_cap(12, 0.12)


@pytest.fixture(scope="session")
def small_leadfield(small_grid, small_sensors):
    return sarvas_leadfield(small_grid, small_sensors)


@pytest.fixture(scope="session")
def small_params():
    return ModelParams(noise_cov=isotropic_noise_cov(12, 3.6e-15), rho=0.03)


@pytest.fixture(scope="session")
def small_kernel(small_grid, small_params):
    return LocationKernel(small_grid, small_params.rho)


@pytest.fixture(scope="session")
def small_bundle(small_params, small_grid, small_leadfield, small_kernel):
    return DipoleModel(small_params, small_grid, small_leadfield, small_kernel)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
