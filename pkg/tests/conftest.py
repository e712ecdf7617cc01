import numpy as np
import pytest

from nlstring import SpatialOperators, validate_and_derive


@pytest.fixture(scope="session")
def fig1_params():
    # non-stiff demo string: rho 8000, E 2e11, r 0.2 mm, L 1 m, T0 50 N
    return validate_and_derive(rho=8000, E=2e11, T0=50, L=1.0, r=0.2e-3)


@pytest.fixture(scope="session")
def table1_params():
    # lossy struck string of the simulation parameter table
    return validate_and_derive(rho=8000, E=2e11, T0=40, L=1.0, r=0.29e-3,
                               sigma0_u=0.1, sigma0_v=0.2, sigma1_u=4e-4)


@pytest.fixture(scope="session")
def comparison_params():
    # string used by the explicit-vs-implicit study
    return validate_and_derive(rho=8000, E=2e11, T0=40, L=1.0, r=0.3e-3)


def raised_cosine(x, center, amplitude, half_width):
    prof = 0.5 * amplitude * (1.0 + np.cos(np.pi * (x - center) / half_width))
    return np.where(np.abs(x - center) <= half_width, prof, 0.0)


@pytest.fixture(scope="session")
def small_ops():
    return SpatialOperators.build(12, 1.0, 4)
