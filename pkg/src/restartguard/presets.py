"""Ready-made plant + controller + policy fixtures for the two shipped
systems.

The controller matrices were constructed offline (pole placement for the
warehouse, an LQR design for the helicopter) and are kept as plain numbers
here; the Lyapunov matrix P is derived from them at run time by solving the
closed-loop Lyapunov equation and scaling the resulting ellipsoid until it
fits inside both the admissible set and the unsaturated control region, so
membership in it certifies the whole controller contract.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_lyapunov

from .plant import PlantModel, WarehouseParams, helicopter_plant, warehouse_plant
from .policy import PolicyConfig
from .safety import SafetyController

__all__ = [
    "lyapunov_ellipsoid",
    "warehouse_controller",
    "helicopter_controller",
    "warehouse_policy",
    "helicopter_policy",
    "WAREHOUSE_CENTER",
    "HELICOPTER_K",
]

WAREHOUSE_CENTER = np.array([25.0, 25.0])

# Room-conditioner proportional gain (J/s per deg C of room error).  The
# floor conditioner is left in open loop: its 115 J/s against a 5.3 GJ/K
# heat capacity cannot track anything on control timescales.
WAREHOUSE_ROOM_GAIN = -115.0

# Offline LQR gain for the synthetic helicopter (see helicopter_plant).
HELICOPTER_K = np.array([
    [-0.707107, -4.960944, 0.158114, -7.689315, -20.337453, 2.299847],
    [-0.707107, 4.960944, -0.158114, -7.689315, 20.337453, -2.299847],
])


def lyapunov_ellipsoid(model: PlantModel, K: np.ndarray, center: np.ndarray,
                       feedforward: np.ndarray,
                       q: np.ndarray | None = None,
                       margin: float = 1.0) -> np.ndarray:
    """Lyapunov matrix P for the closed loop A + B K, scaled so the ellipsoid
    {z' P z < 1} lies inside the admissible set and inside the region where
    K z + feedforward respects the input bounds.

    q: right-hand side of the Lyapunov equation (default identity).
    margin: extra shrink factor (<1 leaves slack to the binding constraint).
    """
    M = model.A + model.B @ np.atleast_2d(K)
    n = model.n
    Q = np.eye(n) if q is None else np.atleast_2d(q)
    Pt = solve_lyapunov(M.T, -Q)
    Pt = 0.5 * (Pt + Pt.T)
    return scale_ellipsoid(model, np.atleast_2d(K), center, feedforward, Pt, margin)


def scale_ellipsoid(model: PlantModel, K: np.ndarray, center: np.ndarray,
                    feedforward: np.ndarray, shape: np.ndarray,
                    margin: float = 1.0) -> np.ndarray:
    """Scale a positive-definite shape matrix so {z' P z < 1} fits inside the
    safety polytope (shifted by `center`) and the unsaturated control region.

    For a row constraint a' z <= b the largest level set satisfying it has
    level b^2 / (a' shape^{-1} a); the binding constraint wins.
    """
    Pinv = np.linalg.inv(shape)
    levels = []
    for a, b in zip(model.safety.H, model.safety.h):
        slack = b - a @ center
        if slack <= 0:
            raise ValueError("regulation point violates the safety polytope")
        levels.append(slack ** 2 / (a @ Pinv @ a))
    for j, k_row in enumerate(np.atleast_2d(K)):
        quad = k_row @ Pinv @ k_row
        if quad <= 1e-300:
            continue  # identically-zero row never saturates
        for lim in (model.input_bounds.upper[j] - feedforward[j],
                    feedforward[j] - model.input_bounds.lower[j]):
            if lim <= 0:
                raise ValueError("feedforward already saturates an input")
            levels.append(lim ** 2 / quad)
    return shape / (min(levels) * margin)


def warehouse_feedforward(model: PlantModel, t_out_nominal: float,
                          center: np.ndarray) -> np.ndarray:
    """Constant input holding `center` in equilibrium at the given outside
    temperature (solves A c + B u + E w = 0 for u)."""
    rhs = -(model.A @ center + model.E @ np.array([t_out_nominal]))
    return np.linalg.solve(model.B, rhs)


# Ellipsoid shape found by an offline parameter search: the off-diagonal
# term aligns the ellipsoid with the floor/room correlation the closed loop
# actually produces, which widens the certified floor-temperature range from
# ~0.35 degC (identity-Q Lyapunov solution) to ~5 degC.
_WAREHOUSE_SHAPE = np.array([
    [0.07985, -0.06408],
    [-0.06408, 0.09143],
])


def warehouse_controller(model: PlantModel | None = None,
                         t_out_nominal: float | None = None,
                         room_gain: float = WAREHOUSE_ROOM_GAIN,
                         margin: float = 1.0) -> SafetyController:
    """Safety controller for the warehouse: proportional room-conditioner
    feedback around 25 degC plus a feedforward that cancels the nominal
    outside-temperature load."""
    model = model or warehouse_plant()
    if t_out_nominal is None:
        t_out_nominal = float(model.disturbance_nominal()[0])
    K = np.array([[0.0, 0.0], [0.0, room_gain]])
    center = WAREHOUSE_CENTER
    ff = warehouse_feedforward(model, t_out_nominal, center)
    M = model.A + model.B @ K
    if np.max(np.linalg.eigvals(M).real) >= 0:
        raise ValueError("warehouse closed loop not stable with this gain")
    P = scale_ellipsoid(model, K, center, ff, _WAREHOUSE_SHAPE, margin)
    return SafetyController(K, P, model.input_bounds, center, ff)


def helicopter_controller(model: PlantModel | None = None,
                          margin: float = 1.0) -> SafetyController:
    """Safety controller for the synthetic helicopter (hover regulation)."""
    model = model or helicopter_plant()
    center = np.zeros(6)
    ff = np.zeros(2)
    P = lyapunov_ellipsoid(model, HELICOPTER_K, center, ff, margin=margin)
    return SafetyController(HELICOPTER_K, P, model.input_bounds, center, ff)


def warehouse_policy(**overrides) -> PolicyConfig:
    """Restart-window search settings sized for the warehouse timescales."""
    kw = dict(t_s=30.0, t_r=10.0, t_alpha=1800.0,
              delta_init=500.0, inc_step=500.0, max_iters=20,
              reach_step_uc=30.0, reach_step_sc=30.0)
    kw.update(overrides)
    return PolicyConfig(**kw)


def helicopter_policy(**overrides) -> PolicyConfig:
    """Restart-window search settings sized for the helicopter timescales."""
    kw = dict(t_s=0.3, t_r=0.39, t_alpha=60.0,
              delta_init=0.1, inc_step=0.1, max_iters=16,
              reach_step_uc=0.02, reach_step_sc=0.25)
    kw.update(overrides)
    return PolicyConfig(**kw)
