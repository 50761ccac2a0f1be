import math

import numpy as np
import pytest

from qsdlab import spectral, bernstein, semigroup


@pytest.fixture(scope="session")
def basis_pi():
    """Headline basis: interval of length pi, constant U, K = 256."""
    dom = spectral.interval(math.pi)
    grid = spectral.build_grid(dom, 2001)
    return spectral.eigensystem_closed_form(math.pi, 256, grid)


@pytest.fixture(scope="session")
def basis_pi_small():
    dom = spectral.interval(math.pi)
    grid = spectral.build_grid(dom, 801)
    return spectral.eigensystem_closed_form(math.pi, 64, grid)


@pytest.fixture(scope="session")
def bern_sqrt():
    """B(l) = l^(1/2): the pure stable exponent of the headline runs."""
    return bernstein.stable_drift(b=0.0, c=1.0, alpha=0.5)


@pytest.fixture(scope="session")
def bern_linear():
    return bernstein.linear(1.0)


@pytest.fixture(scope="session")
def nu_mu0(basis_pi):
    return semigroup.ground_state_initial(basis_pi)


@pytest.fixture(scope="session")
def nu_dirac(basis_pi):
    return semigroup.dirac_initial(basis_pi, math.pi / 2.0)


def tv_frozen(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())
