"""Continuous-time plant models and safety-polytope membership.

All plants are linear (optionally with a bounded exogenous disturbance):

    dx/dt = A x + B u + E w,   u clamped to InputBounds, w in a fixed interval.

Two concrete systems ship with the package: a two-state warehouse
temperature model (floor + room, heat conduction) and a six-state
tandem-rotor helicopter model (elevation / pitch / travel angles and
their rates).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

__all__ = [
    "InputBounds",
    "SafetyPolytope",
    "PlantModel",
    "WarehouseParams",
    "WarehouseRates",
    "Trajectory",
    "IntegrationDiverged",
    "warehouse_derivative",
    "warehouse_plant",
    "helicopter_plant",
    "HELICOPTER_STATE_NAMES",
    "linear_derivative",
    "integrate",
    "is_admissible",
]

_OVERFLOW_GUARD = 1e12


def _as_matrix(a, rows=None, cols=None, name="matrix"):
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"{name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"{name}: expected {cols} cols, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name}: non-finite entries")
    return m


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class InputBounds:
    """Component-wise actuator limits, lower[i] <= upper[i]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("input bounds: lower/upper shape mismatch")
        if np.any(lo > hi):
            raise ValueError("input bounds: lower > upper")
        object.__setattr__(self, "lower", _freeze(lo))
        object.__setattr__(self, "upper", _freeze(hi))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def clamp(self, u: np.ndarray) -> tuple[np.ndarray, bool]:
        """Clamp u into the box; second value reports whether clamping acted."""
        u = np.asarray(u, dtype=float).ravel()
        if u.size != self.dim:
            raise ValueError("input dimension mismatch")
        clipped = np.clip(u, self.lower, self.upper)
        return clipped, bool(np.any(clipped != u))


@dataclass(frozen=True)
class SafetyPolytope:
    """Admissible set S = {x : H x <= h}; its complement is the unsafe set."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = _as_matrix(self.H, name="H")
        h = np.asarray(self.h, dtype=float).ravel()
        if H.shape[0] != h.size:
            raise ValueError("safety polytope: H rows != len(h)")
        if H.shape[0] < 1:
            raise ValueError("safety polytope: needs at least one row")
        object.__setattr__(self, "H", _freeze(H))
        object.__setattr__(self, "h", _freeze(h))

    @property
    def dim(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True)
class PlantModel:
    """Linear plant dx/dt = A x + B u + E w with input bounds and safety set.

    E and disturbance_bounds are None for undisturbed plants.
    disturbance_bounds is a (lo, hi) pair of d-vectors; the disturbance is
    an arbitrary measurable signal inside that box.
    """

    A: np.ndarray
    B: np.ndarray
    input_bounds: InputBounds
    safety: SafetyPolytope
    name: str = "plant"
    E: Optional[np.ndarray] = None
    disturbance_bounds: Optional[tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError("A must be square")
        B = _as_matrix(self.B, rows=n, name="B")
        if B.shape[1] != self.input_bounds.dim:
            raise ValueError("B cols != input dimension")
        if self.safety.dim != n:
            raise ValueError("safety polytope dimension != state dimension")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        if self.E is not None:
            E = _as_matrix(self.E, rows=n, name="E")
            if self.disturbance_bounds is None:
                raise ValueError("E given without disturbance_bounds")
            lo = np.asarray(self.disturbance_bounds[0], dtype=float).ravel()
            hi = np.asarray(self.disturbance_bounds[1], dtype=float).ravel()
            if lo.size != E.shape[1] or hi.size != E.shape[1]:
                raise ValueError("disturbance bounds dimension != E cols")
            if np.any(lo > hi):
                raise ValueError("disturbance bounds: lower > upper")
            object.__setattr__(self, "E", _freeze(E))
            object.__setattr__(self, "disturbance_bounds", (_freeze(lo), _freeze(hi)))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_disturbance(self, lo, hi=None) -> "PlantModel":
        """Copy of the model with the disturbance interval replaced."""
        if self.E is None:
            raise ValueError(f"{self.name}: plant has no disturbance channel")
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = lo.copy() if hi is None else np.atleast_1d(np.asarray(hi, dtype=float))
        return PlantModel(self.A, self.B, self.input_bounds, self.safety,
                          self.name, self.E, (lo, hi))

    def disturbance_nominal(self) -> Optional[np.ndarray]:
        if self.disturbance_bounds is None:
            return None
        lo, hi = self.disturbance_bounds
        return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Warehouse temperature system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WarehouseParams:
    """Physical constants of the warehouse floor/room heat-transfer model.

    Heat-transfer coefficients are given per hour (J/(h m^2 K)) and converted
    to per-second terms internally.  The specific heats are configurable
    defaults (concrete floor, room air); the remaining values follow the
    published warehouse model.
    """

    u_floor_room: float = 49920.0    # J/(h m^2 K)
    u_room_out: float = 539.61       # J/(h m^2 K)
    area_floor_room: float = 25.0    # m^2
    area_room_out: float = 48.0      # m^2
    mass_floor: float = 6000.0       # kg
    mass_room: float = 69.96         # kg
    cp_floor: float = 880.0          # J/(kg K), concrete
    cp_room: float = 1005.0          # J/(kg K), air
    heat_floor_max: float = 115.0    # J/s
    heat_room_max: float = 800.0     # J/s
    temp_low: float = 20.0           # deg C, admissible room band
    temp_high: float = 30.0

    def __post_init__(self):
        for name in ("u_floor_room", "u_room_out", "area_floor_room",
                     "area_room_out", "mass_floor", "mass_room",
                     "cp_floor", "cp_room", "heat_floor_max", "heat_room_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"warehouse parameter {name} must be > 0")

    # per-second coupling coefficients
    @property
    def k_floor(self) -> float:
        return (self.u_floor_room / 3600.0) * self.area_floor_room / (self.mass_floor * self.cp_floor)

    @property
    def k_room_out(self) -> float:
        return (self.u_room_out / 3600.0) * self.area_room_out / (self.mass_room * self.cp_room)

    @property
    def k_room_floor(self) -> float:
        return (self.u_floor_room / 3600.0) * self.area_floor_room / (self.mass_room * self.cp_room)

    @property
    def gain_floor(self) -> float:
        return 1.0 / (self.mass_floor * self.cp_floor)

    @property
    def gain_room(self) -> float:
        return 1.0 / (self.mass_room * self.cp_room)


class WarehouseRates(NamedTuple):
    dT_floor: float
    dT_room: float
    clamped: bool


def warehouse_derivative(params: WarehouseParams, t_floor: float, t_room: float,
                         t_out: float, u) -> WarehouseRates:
    """Temperature rates (deg C/s) of the floor/room heat-transfer model.

    u = (floor conditioner, room conditioner) in J/s, clamped to capacity.
    """
    vals = np.array([t_floor, t_room, t_out], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("warehouse_derivative: non-finite temperature")
    u = np.asarray(u, dtype=float).ravel()
    if u.size != 2 or not np.all(np.isfinite(u)):
        raise ValueError("warehouse_derivative: input must be 2 finite values")
    lim = np.array([params.heat_floor_max, params.heat_room_max])
    uc = np.clip(u, -lim, lim)
    clamped = bool(np.any(uc != u))
    d_floor = -params.k_floor * (t_floor - t_room) + params.gain_floor * uc[0]
    d_room = (-params.k_room_out * (t_room - t_out)
              + params.k_room_floor * (t_floor - t_room)
              + params.gain_room * uc[1])
    return WarehouseRates(d_floor, d_room, clamped)


def warehouse_plant(params: WarehouseParams | None = None,
                    t_out_range: tuple[float, float] = (30.0, 30.0)) -> PlantModel:
    """Warehouse model as a PlantModel; state (T_floor, T_room), input
    (floor conditioner, room conditioner), outside temperature as bounded
    disturbance."""
    p = params or WarehouseParams()
    A = np.array([
        [-p.k_floor, p.k_floor],
        [p.k_room_floor, -(p.k_room_out + p.k_room_floor)],
    ])
    B = np.diag([p.gain_floor, p.gain_room])
    E = np.array([[0.0], [p.k_room_out]])
    bounds = InputBounds(np.array([-p.heat_floor_max, -p.heat_room_max]),
                         np.array([p.heat_floor_max, p.heat_room_max]))
    # admissible iff temp_low <= T_room <= temp_high
    safety = SafetyPolytope(np.array([[0.0, 1.0], [0.0, -1.0]]),
                            np.array([p.temp_high, -p.temp_low]))
    lo, hi = float(t_out_range[0]), float(t_out_range[1])
    return PlantModel(A, B, bounds, safety, "warehouse", E,
                      (np.array([lo]), np.array([hi])))


# ---------------------------------------------------------------------------
# 3-DoF-style helicopter
# ---------------------------------------------------------------------------

HELICOPTER_STATE_NAMES = ("elevation", "pitch", "travel",
                          "d_elevation", "d_pitch", "d_travel")


def helicopter_plant(accel_elev: float = 0.012, accel_pitch: float = 0.012,
                     travel_coupling: float = 0.3,
                     voltage_max: float = 1.1) -> PlantModel:
    """Synthetic six-state tandem-rotor helicopter model.

    State (elevation, pitch, travel, and their rates).  The summed motor
    voltage accelerates elevation, the differential voltage accelerates
    pitch, and travel is driven by the pitch angle.  The published plant for
    this class of test stand is vendor-specific; this model reproduces the
    structure (two actuated double-integrator channels plus a pitch-coupled
    travel channel) with synthetic coefficients, and quantitative claims
    about it are property-based, not numeric.

    Safety: the fans must not touch the surface, -elev + |pitch| <= 0.3,
    and |pitch| <= pi/4.  Motor voltages are limited to |v| <= voltage_max.
    """
    A = np.zeros((6, 6))
    A[0, 3] = 1.0
    A[1, 4] = 1.0
    A[2, 5] = 1.0
    A[5, 1] = -travel_coupling
    B = np.zeros((6, 2))
    B[3, :] = [accel_elev, accel_elev]
    B[4, :] = [accel_pitch, -accel_pitch]
    bounds = InputBounds(np.array([-voltage_max, -voltage_max]),
                         np.array([voltage_max, voltage_max]))
    H = np.array([
        [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
    ])
    h = np.array([0.3, 0.3, np.pi / 4, np.pi / 4])
    return PlantModel(A, B, bounds, SafetyPolytope(H, h), "helicopter")


# ---------------------------------------------------------------------------
# Generic operations
# ---------------------------------------------------------------------------

def linear_derivative(model: PlantModel, x: np.ndarray, u: np.ndarray,
                      w: Optional[np.ndarray] = None) -> np.ndarray:
    """dx/dt = A x + B u (+ E w).  Dimensions are checked, inputs are not
    clamped here."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if x.size != model.n:
        raise ValueError("state dimension mismatch")
    if u.size != model.m:
        raise ValueError("input dimension mismatch")
    dx = model.A @ x + model.B @ u
    if model.E is not None:
        if w is None:
            w = model.disturbance_nominal()
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if w.size != model.E.shape[1]:
            raise ValueError("disturbance dimension mismatch")
        dx = dx + model.E @ w
    elif w is not None:
        raise ValueError(f"{model.name}: plant has no disturbance channel")
    return dx


class IntegrationDiverged(RuntimeError):
    """Raised when a trajectory leaves the overflow guard; carries the last
    finite state."""

    def __init__(self, t: float, last_state: np.ndarray):
        super().__init__(f"integration diverged at t={t:.6g}")
        self.t = t
        self.last_state = last_state


@dataclass
class Trajectory:
    """Fixed-step simulation record: times (k+1,), states (k+1, n),
    inputs (k, m) actually applied (after clamping)."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


UPolicy = Union[np.ndarray, Callable[[float, np.ndarray], np.ndarray]]


def integrate(model: PlantModel, x0: np.ndarray, u_policy: UPolicy,
              dt: float, steps: int, w: Optional[np.ndarray] = None) -> Trajectory:
    """Fixed-step RK4 roll-out with zero-order-hold inputs.

    u_policy is either a constant input vector or a callable (t, x) -> u;
    whatever it returns is clamped to the plant's InputBounds before use.
    The disturbance w is held constant (defaults to the model's nominal).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    x = np.asarray(x0, dtype=float).ravel().copy()
    if x.size != model.n:
        raise ValueError("state dimension mismatch")
    if w is None and model.E is not None:
        w = model.disturbance_nominal()

    times = np.empty(steps + 1)
    states = np.empty((steps + 1, model.n))
    inputs = np.empty((steps, model.m))
    times[0] = 0.0
    states[0] = x

    const_u = not callable(u_policy)
    for k in range(steps):
        t = k * dt
        u_raw = u_policy if const_u else u_policy(t, x)
        u, _ = model.input_bounds.clamp(u_raw)
        k1 = linear_derivative(model, x, u, w)
        k2 = linear_derivative(model, x + 0.5 * dt * k1, u, w)
        k3 = linear_derivative(model, x + 0.5 * dt * k2, u, w)
        k4 = linear_derivative(model, x + dt * k3, u, w)
        x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_new)) or np.any(np.abs(x_new) > _OVERFLOW_GUARD):
            raise IntegrationDiverged((k + 1) * dt, x)
        x = x_new
        times[k + 1] = (k + 1) * dt
        states[k + 1] = x
        inputs[k] = u
    return Trajectory(times, states, inputs)


def is_admissible(safety: SafetyPolytope, x: np.ndarray) -> bool:
    """True iff H x <= h component-wise."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != safety.dim:
        raise ValueError("state dimension mismatch")
    return bool(np.all(safety.H @ x <= safety.h))
