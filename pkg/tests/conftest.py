"""Shared fixtures: bundled geometries and spaces."""
import numpy as np
import pytest

from asg1.samples import bilinear_grid, corner_domain, perturbed_grid
from asg1.splinecore import SplineSpace1D


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def bilinear():
    """2x2 bilinear grid in S^{3,2}_2."""
    return bilinear_grid()


@pytest.fixture(scope="session")
def planar_asg1():
    """2x2 bilinear grid represented in S^{4,1}_2 (AS-G1 as is)."""
    return bilinear_grid(space=SplineSpace1D(4, 1, 2))


@pytest.fixture(scope="session")
def perturbed():
    return perturbed_grid()


@pytest.fixture(scope="session")
def corner():
    return corner_domain()


@pytest.fixture(scope="session")
def single_square():
    return bilinear_grid(1, 1, 0.0, space=SplineSpace1D(4, 1, 2))
