import numpy as np
import pytest

import restartguard as rg
from restartguard import presets


@pytest.fixture(scope="session")
def warehouse_model():
    return rg.warehouse_plant(t_out_range=(45.0, 45.0))


@pytest.fixture(scope="session")
def warehouse_sc(warehouse_model):
    return presets.warehouse_controller(warehouse_model)


@pytest.fixture(scope="session")
def warehouse_policy():
    return presets.warehouse_policy()


@pytest.fixture(scope="session")
def heli_model():
    return rg.helicopter_plant()


@pytest.fixture(scope="session")
def heli_sc(heli_model):
    return presets.helicopter_controller(heli_model)


@pytest.fixture(scope="session")
def heli_policy():
    return presets.helicopter_policy()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def integrator_plant(bound=1.0, limit=10.0):
    """1-D integrator dx/dt = u with |u| <= bound and |x| <= limit."""
    return rg.PlantModel(
        np.array([[0.0]]), np.array([[1.0]]),
        rg.InputBounds(np.array([-bound]), np.array([bound])),
        rg.SafetyPolytope(np.array([[1.0], [-1.0]]), np.array([limit, limit])),
        "integrator")


def integrator_sc(bound=1.0, gain=-0.8):
    """Stabilizing controller for the 1-D integrator: u = gain * x with the
    ellipsoid x^2 < 1 strictly inside the unsaturated region."""
    return rg.SafetyController(
        np.array([[gain]]), np.array([[1.0]]),
        rg.InputBounds(np.array([-bound]), np.array([bound])))
