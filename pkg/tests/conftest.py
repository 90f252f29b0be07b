import math

import pytest

from gfn.lattice import PhysicalParams, build_mode_set


@pytest.fixture
def params():
    return PhysicalParams(m=1.0, L=2 * math.pi, lambda_cut=1.0, nu=0.5, hbar=1.0)


@pytest.fixture
def modes(params):
    return build_mode_set(params)
