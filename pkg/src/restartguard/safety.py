"""Safety controller u = K (x - c) + u_ff, Lyapunov ellipsoid, and numeric
verification of the controller contract.

The recoverable region is the open ellipsoid {x : (x-c)' P (x-c) < 1} around
the regulation point c.  For a valid controller the Lyapunov value is
strictly decreasing along unsaturated closed-loop trajectories, so any
trajectory entering the ellipsoid stays admissible forever.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .plant import InputBounds, PlantModel, integrate, is_admissible

__all__ = [
    "SafetyController",
    "ControlOutput",
    "VerifyReport",
    "control",
    "lyapunov_value",
    "in_recoverable",
    "sample_recoverable",
    "verify_sc",
]


@dataclass(frozen=True)
class SafetyController:
    """Linear state-feedback safety controller with Lyapunov certificate.

    K: (m, n) gain, applied to the deviation from `center`.
    P: (n, n) symmetric positive-definite matrix; {z'Pz < 1} is the
       recoverable region in deviation coordinates z = x - center.
    feedforward: constant input added to K z (cancels the nominal load,
       e.g. heat leakage at the design outside temperature); zero if omitted.
    """

    K: np.ndarray
    P: np.ndarray
    input_bounds: InputBounds
    center: Optional[np.ndarray] = None
    feedforward: Optional[np.ndarray] = None

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = K.shape[1]
        if P.shape != (n, n):
            raise ValueError("P must be n x n matching K columns")
        if K.shape[0] != self.input_bounds.dim:
            raise ValueError("K rows != input dimension")
        if not np.all(np.isfinite(K)) or not np.all(np.isfinite(P)):
            raise ValueError("non-finite controller matrices")
        if np.max(np.abs(P - P.T)) > 1e-9:
            raise ValueError("P not symmetric within 1e-9")
        P = 0.5 * (P + P.T)
        # positive definiteness: all leading principal minors > 0
        for k in range(1, n + 1):
            if np.linalg.det(P[:k, :k]) <= 0:
                raise ValueError("P not positive-definite")
        c = np.zeros(n) if self.center is None else np.asarray(self.center, dtype=float).ravel()
        if c.size != n:
            raise ValueError("center dimension mismatch")
        ff = (np.zeros(self.input_bounds.dim) if self.feedforward is None
              else np.asarray(self.feedforward, dtype=float).ravel())
        if ff.size != self.input_bounds.dim:
            raise ValueError("feedforward dimension mismatch")
        for name, val in (("K", K), ("P", P), ("center", c), ("feedforward", ff)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.K.shape[1]

    @property
    def m(self) -> int:
        return self.K.shape[0]


class ControlOutput(NamedTuple):
    u: np.ndarray
    saturated: bool


def control(sc: SafetyController, x: np.ndarray) -> ControlOutput:
    """K (x - c) + feedforward, clamped to the input bounds."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != sc.n:
        raise ValueError("state dimension mismatch")
    raw = sc.K @ (x - sc.center) + sc.feedforward
    u, clamped = sc.input_bounds.clamp(raw)
    return ControlOutput(u, clamped)


def lyapunov_value(sc: SafetyController, x: np.ndarray) -> float:
    """(x-c)' P (x-c); nonnegative, zero only at the regulation point."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != sc.n:
        raise ValueError("state dimension mismatch")
    z = x - sc.center
    return float(z @ sc.P @ z)


def in_recoverable(sc: SafetyController, x: np.ndarray) -> bool:
    """Strict ellipsoid membership (the boundary itself is excluded)."""
    return lyapunov_value(sc, x) < 1.0


def sample_recoverable(sc: SafetyController, count: int, rng,
                       shell: float = 1.0) -> np.ndarray:
    """Uniform samples inside the recoverable ellipsoid (scaled by `shell`)."""
    n = sc.n
    L = np.linalg.cholesky(np.linalg.inv(sc.P))
    g = rng.normal(size=(count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / n)
    return sc.center + (g * radii * shell) @ L.T


@dataclass
class VerifyReport:
    passed: bool
    samples: int
    max_step_increase: float          # worst V(x_{k+1}) - V(x_k) on unsaturated steps
    exit_count: int                   # trajectories that left the admissible set
    escape_count: int                 # trajectories that left the ellipsoid
    tolerance: float

    def __str__(self):
        s = "pass" if self.passed else "FAIL"
        return (f"verify_sc: {s} ({self.samples} samples, "
                f"max unsaturated V-step {self.max_step_increase:.3e}, "
                f"{self.exit_count} admissibility exits, "
                f"{self.escape_count} ellipsoid escapes)")


def verify_sc(sc: SafetyController, model: PlantModel, samples: int = 200,
              horizon: float = 50.0, dt: float = 0.01, seed: int = 0,
              tolerance: float = 1e-9) -> VerifyReport:
    """Closed-loop check of the controller contract on sampled states.

    For each start inside the recoverable ellipsoid the closed loop is
    simulated for `horizon` with the disturbance held at its nominal value.
    The report passes iff the per-step Lyapunov difference never exceeds
    `tolerance` while the control is unsaturated, and no trajectory leaves
    the admissible set or the ellipsoid.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    starts = sample_recoverable(sc, samples, rng, shell=0.995)
    steps = max(1, int(round(horizon / dt)))
    max_inc = -np.inf
    exits = 0
    escapes = 0
    for x0 in starts:
        traj = integrate(model, x0, lambda t, x: control(sc, x).u, dt, steps)
        V = np.einsum("ij,jk,ik->i", traj.states - sc.center, sc.P,
                      traj.states - sc.center)
        raw = (traj.states[:-1] - sc.center) @ sc.K.T + sc.feedforward
        unsat = np.all((raw >= sc.input_bounds.lower - 1e-12)
                       & (raw <= sc.input_bounds.upper + 1e-12), axis=1)
        dV = np.diff(V)
        if np.any(unsat):
            max_inc = max(max_inc, float(dV[unsat].max()))
        if not all(is_admissible(model.safety, s) for s in traj.states[:: max(1, steps // 50)]):
            exits += 1
        if V.max() >= 1.0 + 1e-9:
            escapes += 1
    passed = (max_inc <= tolerance) and exits == 0 and escapes == 0
    return VerifyReport(passed, samples, max_inc, exits, escapes, tolerance)
