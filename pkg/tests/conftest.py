import numpy as np
import pytest

from localspde.kernels import bump_kernel, laplacian_bump_kernel, normalized
from localspde.operators import advection_diffusion_spec


@pytest.fixture(scope="session")
def bump1():
    return bump_kernel(1)


@pytest.fixture(scope="session")
def bump2():
    return bump_kernel(2)


@pytest.fixture(scope="session")
def bump3():
    return bump_kernel(3)


@pytest.fixture(scope="session")
def unit_bump1(bump1):
    return normalized(bump1)


@pytest.fixture(scope="session")
def unit_bump3(bump3):
    return normalized(bump3)


@pytest.fixture(scope="session")
def zero_moment2():
    return laplacian_bump_kernel(2)


@pytest.fixture(scope="session")
def example1_spec():
    """Canonical d=1 model A = theta1 Lap + theta2 d/dx (+ offset c = 0)."""
    return advection_diffusion_spec(1, c=0.0)


@pytest.fixture(scope="session")
def example2_spec3d():
    """Canonical d=3 model with reaction term (symbol-level use only)."""
    return advection_diffusion_spec(3, with_reaction=True)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
