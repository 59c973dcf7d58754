import numpy as np
import pytest

from spinboson import (
    ModelParams,
    SpectralDensity,
    VariationalState,
    discretize_log,
)


@pytest.fixture(scope="session")
def mesh22():
    """Two-mode toy bath: lambda^2 = (3/32, 3/8), omega = (7/18, 7/9)."""
    return discretize_log(SpectralDensity(alpha=0.5, s=1.0), ratio=2.0, n_modes=2)


@pytest.fixture(scope="session")
def mesh22_free():
    """Same mesh with alpha = 0 (all couplings vanish)."""
    return discretize_log(SpectralDensity(alpha=0.0, s=1.0), ratio=2.0, n_modes=2)


@pytest.fixture(scope="session")
def free_spin():
    return ModelParams(bias=0.0, tunneling=0.1)


def make_state(weights_up, weights_down, disp_up, disp_down):
    return VariationalState(
        np.atleast_1d(np.asarray(weights_up, dtype=float)),
        np.atleast_1d(np.asarray(weights_down, dtype=float)),
        np.atleast_2d(np.asarray(disp_up, dtype=float)),
        np.atleast_2d(np.asarray(disp_down, dtype=float)),
    )
