"""Safe-restart-window computation and state-space restart-time maps.

A restart after delta_r time units is safe from state x when three
reachability conditions hold:

  1. under arbitrary admissible inputs, nothing reachable within
     delta_r + t_r leaves the admissible set;
  2. with the safety controller in charge afterwards, nothing reachable
     within the settling horizon t_alpha leaves the admissible set;
  3. at exactly t_alpha after the reboot completes, the reachable set lies
     inside the recoverable ellipsoid.

The window search mirrors the greedy on-line procedure: start from
delta_init, grow the candidate by inc_step on success, shrink on failure,
keep the best passing value, and deduct the time the search itself consumed
before handing the result to the restart timer.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .plant import PlantModel, is_admissible
from .reach import (ReachBox, ReachConfig, ReachDivergence, always_inside,
                    inside_recoverable, reach_upto)
from .safety import SafetyController

__all__ = [
    "PolicyConfig",
    "SafeWindow",
    "CellClass",
    "GridAxis",
    "GridSpec",
    "RestartTimeMap",
    "check_conditions",
    "find_restart_time",
    "classify_state",
    "restart_time_map",
]


@dataclass(frozen=True)
class PolicyConfig:
    """Timing constants and search budget of the restart policy.

    t_s: length of one secure-execution-interval round (also the wall-clock
         budget of one window search when compute_budget is unset).
    t_r: reboot duration of the platform.
    t_alpha: settling horizon granted to the safety controller.
    delta_init / inc_step: greedy search start and increment.
    max_iters: iteration cap; the deterministic stand-in for the wall-clock
         budget (set compute_budget to run against the real clock instead).
    reach_step_uc / reach_step_sc: propagation substeps for the two modes.
    """

    t_s: float
    t_r: float
    t_alpha: float
    delta_init: float
    inc_step: float
    max_iters: int = 16
    compute_budget: Optional[float] = None
    reach_step_uc: float = 0.05
    reach_step_sc: float = 0.05
    inflation: float = 0.0

    def __post_init__(self):
        for name in ("t_s", "t_r", "t_alpha", "delta_init", "inc_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.delta_init < self.inc_step:
            raise ValueError("delta_init must be >= inc_step")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def uc_config(self) -> ReachConfig:
        return ReachConfig(self.reach_step_uc, "UC", self.inflation)

    def sc_config(self) -> ReachConfig:
        return ReachConfig(self.reach_step_sc, "SC", self.inflation)


@dataclass(frozen=True)
class SafeWindow:
    """Verified restart window; elapsed search time is already deducted."""

    delta_safe: float
    computed_at_state: np.ndarray
    elapsed_adjustment: float = 0.0

    def __post_init__(self):
        if self.delta_safe <= 0:
            raise ValueError("delta_safe must be > 0")
        x = np.asarray(self.computed_at_state, dtype=float).ravel()
        x.flags.writeable = False
        object.__setattr__(self, "computed_at_state", x)


CellKind = Literal["inadmissible", "unrecoverable", "safe"]

CELL_CODES = {"inadmissible": 0, "unrecoverable": 1, "safe": 2}
CELL_NAMES = {v: k for k, v in CELL_CODES.items()}


@dataclass(frozen=True)
class CellClass:
    kind: CellKind
    delta_safe: Optional[float] = None

    def __post_init__(self):
        if self.kind == "safe" and (self.delta_safe is None or self.delta_safe <= 0):
            raise ValueError("safe cell requires delta_safe > 0")
        if self.kind != "safe" and self.delta_safe is not None:
            raise ValueError("delta_safe only valid on safe cells")


def check_conditions(x: np.ndarray, delta_r: float, model: PlantModel,
                     sc: SafetyController, cfg: PolicyConfig) -> bool:
    """Evaluate the three restart-safety conditions for a restart at
    delta_r; reachability divergence counts as failure."""
    if delta_r < 0:
        return False
    box = ReachBox.point(x)
    try:
        adversary = reach_upto(model, box, cfg.uc_config(), None,
                               delta_r + cfg.t_r)
        if not always_inside(adversary.sweep, model.safety):
            return False
        recovery = reach_upto(model, adversary.final, cfg.sc_config(), sc,
                              cfg.t_alpha)
        if not always_inside(recovery.sweep, model.safety):
            return False
        return inside_recoverable(recovery.final, sc)
    except ReachDivergence:
        return False


def find_restart_time(x: np.ndarray, model: PlantModel, sc: SafetyController,
                      cfg: PolicyConfig,
                      elapsed: Optional[float] = None) -> Optional[SafeWindow]:
    """One greedy search round for the largest verified restart window.

    elapsed: search time to deduct from the result.  Pass the simulated
    round duration when driving a simulation deterministically; leave None
    with compute_budget set to search against the wall clock, in which case
    the measured time is deducted.  Returns None when no positive window
    survives (state inadmissible, nothing passes, or the deduction eats the
    whole window).
    """
    x = np.asarray(x, dtype=float).ravel()
    if not is_admissible(model.safety, x):
        return None
    wall = cfg.compute_budget is not None and elapsed is None
    budget = cfg.compute_budget if wall else None
    started = time.monotonic() if wall else 0.0

    candidate = cfg.delta_init
    best: Optional[float] = None
    iters = 0
    while True:
        if wall:
            if time.monotonic() - started >= budget:
                break
        elif iters >= cfg.max_iters:
            break
        iters += 1
        if candidate <= 0.0:
            break  # shrunk to nothing: unrecoverable from here
        if check_conditions(x, candidate, model, sc, cfg):
            best = candidate
            candidate += cfg.inc_step
        else:
            candidate = max(candidate - cfg.inc_step, 0.0)

    if best is None:
        return None
    charge = (time.monotonic() - started) if wall else (elapsed or 0.0)
    remaining = best - charge
    # windows surviving the deduction by float dust only are useless
    if remaining <= 1e-9 * best:
        return None
    return SafeWindow(remaining, x, charge)


def classify_state(x: np.ndarray, model: PlantModel, sc: SafetyController,
                   cfg: PolicyConfig) -> CellClass:
    """Inadmissible / unrecoverable / safe(delta) verdict for one state."""
    x = np.asarray(x, dtype=float).ravel()
    if not is_admissible(model.safety, x):
        return CellClass("inadmissible")
    window = find_restart_time(x, model, sc, cfg, elapsed=0.0)
    if window is None:
        return CellClass("unrecoverable")
    return CellClass("safe", window.delta_safe)


# ---------------------------------------------------------------------------
# State-space maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridAxis:
    """One plotted dimension: either a state component or a disturbance
    component, swept over `count` evenly spaced values in [lo, hi]."""

    name: str
    kind: Literal["state", "disturbance"]
    index: int
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis needs at least one point")
        if self.lo > self.hi:
            raise ValueError("axis lo > hi")
        if self.kind not in ("state", "disturbance"):
            raise ValueError("axis kind must be 'state' or 'disturbance'")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class GridSpec:
    """Two plotted axes plus explicit values for every remaining state
    dimension (mirrors fixing the non-plotted coordinates in a projection)."""

    x_axis: GridAxis
    y_axis: GridAxis
    fixed_state: dict = field(default_factory=dict)

    def state_for(self, model: PlantModel, xv: float, yv: float) -> np.ndarray:
        state = np.full(model.n, np.nan)
        for idx, val in self.fixed_state.items():
            state[int(idx)] = float(val)
        for ax, v in ((self.x_axis, xv), (self.y_axis, yv)):
            if ax.kind == "state":
                state[ax.index] = v
        if np.any(np.isnan(state)):
            missing = [i for i in range(model.n) if math.isnan(state[i])]
            raise ValueError(f"grid leaves state dims {missing} unassigned")
        return state

    def model_for(self, model: PlantModel, xv: float, yv: float) -> PlantModel:
        out = model
        for ax, v in ((self.x_axis, xv), (self.y_axis, yv)):
            if ax.kind == "disturbance":
                lo, hi = out.disturbance_bounds
                lo = lo.copy()
                hi = hi.copy()
                lo[ax.index] = v
                hi[ax.index] = v
                out = out.with_disturbance(lo, hi)
        return out


@dataclass
class RestartTimeMap:
    x_name: str
    y_name: str
    x_values: np.ndarray
    y_values: np.ndarray
    kind: np.ndarray          # (nx, ny) int codes per CELL_CODES
    delta: np.ndarray         # (nx, ny) float, NaN off the safe cells

    def cell(self, i: int, j: int) -> CellClass:
        k = CELL_NAMES[int(self.kind[i, j])]
        return CellClass(k, float(self.delta[i, j]) if k == "safe" else None)

    @property
    def max_delta(self) -> float:
        return float(np.nanmax(self.delta)) if np.any(self.kind == 2) else math.nan

    def argmax_cell(self) -> tuple[int, int]:
        flat = np.nanargmax(np.where(self.kind == 2, self.delta, -np.inf))
        return tuple(np.unravel_index(flat, self.delta.shape))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_index", "y_index", "x_value", "y_value",
                        "class", "delta_safe"])
            for i, xv in enumerate(self.x_values):
                for j, yv in enumerate(self.y_values):
                    k = CELL_NAMES[int(self.kind[i, j])]
                    d = self.delta[i, j]
                    w.writerow([i, j, f"{xv:.10g}", f"{yv:.10g}", k,
                                "" if math.isnan(d) else f"{d:.10g}"])

    @staticmethod
    def from_csv(path, x_name: str = "x", y_name: str = "y") -> "RestartTimeMap":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append((int(rec["x_index"]), int(rec["y_index"]),
                             float(rec["x_value"]), float(rec["y_value"]),
                             rec["class"],
                             float(rec["delta_safe"]) if rec["delta_safe"] else math.nan))
        nx = max(r[0] for r in rows) + 1
        ny = max(r[1] for r in rows) + 1
        xv = np.full(nx, np.nan)
        yv = np.full(ny, np.nan)
        kind = np.zeros((nx, ny), dtype=np.int8)
        delta = np.full((nx, ny), np.nan)
        for i, j, x, y, k, d in rows:
            xv[i] = x
            yv[j] = y
            kind[i, j] = CELL_CODES[k]
            delta[i, j] = d
        return RestartTimeMap(x_name, y_name, xv, yv, kind, delta)


def _eval_column(args):
    model, sc, cfg, grid, i, xv = args
    ny = grid.y_axis.count
    kinds = np.zeros(ny, dtype=np.int8)
    deltas = np.full(ny, np.nan)
    for j, yv in enumerate(grid.y_axis.values):
        cell_model = grid.model_for(model, xv, yv)
        state = grid.state_for(cell_model, xv, yv)
        cell = classify_state(state, cell_model, sc, cfg)
        kinds[j] = CELL_CODES[cell.kind]
        if cell.kind == "safe":
            deltas[j] = cell.delta_safe
    return i, kinds, deltas


def restart_time_map(model: PlantModel, sc: SafetyController,
                     cfg: PolicyConfig, grid: GridSpec,
                     workers: int = 1) -> RestartTimeMap:
    """Classify every grid cell; columns are farmed out to worker processes
    when workers > 1 (cells are independent, the result is identical)."""
    xs = grid.x_axis.values
    ys = grid.y_axis.values
    kind = np.zeros((xs.size, ys.size), dtype=np.int8)
    delta = np.full((xs.size, ys.size), np.nan)
    jobs = [(model, sc, cfg, grid, i, xv) for i, xv in enumerate(xs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_eval_column, jobs))
    else:
        results = [_eval_column(j) for j in jobs]
    for i, kinds, deltas in results:
        kind[i] = kinds
        delta[i] = deltas
    return RestartTimeMap(grid.x_axis.name, grid.y_axis.name, xs, ys, kind, delta)
