"""Closed-loop execution of the full restart protocol with attack injection.

One simulated clock drives everything: plant integration, the control
period, the restart timer, and the window-search budget.  A cycle is

    SEI (safety controller + window search, extending itself on failure)
      -> Normal (mission controller, or the attacker once active)
      -> Rebooting (actuators hold the last command)
      -> re-arm, next SEI.

Safety violations are recorded in the trace, never raised: the point of a
run is to measure whether any occurred.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Union

import numpy as np

from .plant import PlantModel, integrate, is_admissible
from .policy import PolicyConfig, find_restart_time
from .rot import RotEmulator
from .safety import SafetyController, control, lyapunov_value

__all__ = [
    "NoAttack",
    "KillController",
    "SensorCorruption",
    "WorstCaseTakeover",
    "MaxHeaters",
    "AttackScenario",
    "MissionController",
    "SimConfig",
    "SimTrace",
    "run",
    "availability_of",
    "tracking_error",
]

PHASE_SEI = 0
PHASE_NORMAL = 1
PHASE_REBOOTING = 2
PHASE_NAMES = {PHASE_SEI: "sei", PHASE_NORMAL: "normal", PHASE_REBOOTING: "rebooting"}


# ---------------------------------------------------------------------------
# Attack scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoAttack:
    pass


@dataclass(frozen=True)
class KillController:
    """The main-controller task dies `activation` seconds after each SEI
    ends; the actuators then keep replaying its last command."""

    activation: float = 0.0


@dataclass(frozen=True)
class SensorCorruption:
    """The controller's view of the state is corrupted `activation` seconds
    after each SEI ends; the plant itself integrates the truth."""

    activation: float = 0.0
    mode: Literal["additive", "replacement"] = "additive"
    values: tuple = ()

    def corrupt(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        if self.mode == "additive":
            return x + v
        out = x.copy()
        out[: v.size] = v
        return out


@dataclass(frozen=True)
class WorstCaseTakeover:
    """Full takeover immediately after the SEI ends: each control period the
    attacker pushes toward the nearest face of the admissible set."""


@dataclass(frozen=True)
class MaxHeaters:
    """Warehouse attack: both conditioners at full heat immediately after
    the SEI ends, with the outside temperature pinned at t_outside."""

    t_outside: float = 45.0


AttackScenario = Union[NoAttack, KillController, SensorCorruption,
                       WorstCaseTakeover, MaxHeaters]


def _attack_activation(scenario: AttackScenario) -> Optional[float]:
    """Seconds after SEI end at which the attack activates; None = never."""
    if isinstance(scenario, NoAttack):
        return None
    if isinstance(scenario, (WorstCaseTakeover, MaxHeaters)):
        return 0.0
    return scenario.activation


def adversary_input(model: PlantModel, x: np.ndarray, rng) -> np.ndarray:
    """Greedy push toward the nearest admissible-set face.

    Ranks faces by slack, steers the input along the gradient of the face
    velocity (first order through B, second order through A B for faces the
    inputs cannot move directly), and falls back to a random bang-bang
    vertex when both are degenerate.
    """
    H, h = model.safety.H, model.safety.h
    norms = np.linalg.norm(H, axis=1)
    slack = (h - H @ x) / np.where(norms > 0, norms, 1.0)
    row = H[int(np.argmin(slack))]
    d = row @ model.B
    if np.max(np.abs(d)) < 1e-12:
        d = row @ model.A @ model.B
    lo, hi = model.input_bounds.lower, model.input_bounds.upper
    u = np.where(d > 0, hi, lo)
    dead = np.abs(d) < 1e-12
    if np.any(dead):
        u = u.copy()
        u[dead] = np.where(rng.random(int(dead.sum())) < 0.5, hi[dead], lo[dead])
    return u


@dataclass(frozen=True)
class MissionController:
    """Setpoint-tracking linear feedback standing in for the (unspecified)
    mission controller."""

    gain: np.ndarray
    setpoint: np.ndarray
    feedforward: np.ndarray

    @staticmethod
    def from_sc(sc: SafetyController, setpoint=None) -> "MissionController":
        sp = sc.center if setpoint is None else np.asarray(setpoint, dtype=float)
        return MissionController(sc.K, sp, sc.feedforward)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.gain @ (np.asarray(x, dtype=float) - self.setpoint) + self.feedforward


# ---------------------------------------------------------------------------
# Configuration and trace
# ---------------------------------------------------------------------------

@dataclass
class SimConfig:
    model: PlantModel
    sc: SafetyController
    policy: PolicyConfig
    x0: np.ndarray
    horizon: float
    control_period: float = 0.02
    scenario: AttackScenario = NoAttack()
    mission: Optional[MissionController] = None
    seed: int = 0
    record_every: int = 1          # trace thinning (every k-th segment)

    def __post_init__(self):
        if self.control_period <= 0:
            raise ValueError("control period must be > 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if isinstance(self.scenario, MaxHeaters):
            if self.model.E is None:
                raise ValueError("MaxHeaters needs a plant with an outside-"
                                 "temperature disturbance channel")
            self.model = self.model.with_disturbance(
                np.array([self.scenario.t_outside]))
        if self.mission is None:
            self.mission = MissionController.from_sc(self.sc)


@dataclass
class SimTrace:
    times: np.ndarray              # segment end times
    durations: np.ndarray          # segment lengths (0 for the t=0 row)
    phases: np.ndarray             # phase during the segment
    states: np.ndarray             # state at the segment end
    inputs: np.ndarray             # input applied during the segment
    lyapunov: np.ndarray
    events: list                   # (time, kind) tuples
    phase_time: np.ndarray = field(default_factory=lambda: np.zeros(3))
    state_names: tuple = ()
    liveness_ok: bool = True

    def event_times(self, kind: str) -> list:
        return [t for t, k in self.events if k == kind]

    @property
    def violation_count(self) -> int:
        return len(self.event_times("safety-violation"))

    def to_csv(self, path) -> None:
        import csv

        n = self.states.shape[1]
        m = self.inputs.shape[1]
        ev_by_time: dict[float, list[str]] = {}
        for t, k in self.events:
            ev_by_time.setdefault(round(t, 9), []).append(k)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "phase"] + [f"x{i+1}" for i in range(n)]
                       + [f"u{i+1}" for i in range(m)] + ["V", "event"])
            for i in range(self.times.size):
                evs = ";".join(ev_by_time.get(round(float(self.times[i]), 9), []))
                w.writerow([f"{self.times[i]:.10g}", PHASE_NAMES[int(self.phases[i])]]
                           + [f"{v:.10g}" for v in self.states[i]]
                           + [f"{v:.10g}" for v in self.inputs[i]]
                           + [f"{self.lyapunov[i]:.10g}", evs])


def availability_of(trace: SimTrace) -> float:
    """Fraction of simulated time spent under the main controller."""
    total = trace.phase_time.sum()
    if total <= 0:
        raise ValueError("empty trace")
    return float(trace.phase_time[PHASE_NORMAL] / total)


def tracking_error(trace: SimTrace, setpoint) -> float:
    """Root-mean-square distance of the state to the mission setpoint,
    a stand-in progress metric."""
    sp = np.asarray(setpoint, dtype=float)
    d = trace.states - sp
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------

class _Recorder:
    def __init__(self, cfg: SimConfig, x0, sc):
        self.cfg = cfg
        self.rows_t = [0.0]
        self.rows_dt = [0.0]
        self.rows_phase = [PHASE_SEI]
        self.rows_x = [np.asarray(x0, dtype=float).copy()]
        self.rows_u = [np.zeros(cfg.model.m)]
        self.rows_v = [lyapunov_value(sc, x0)]
        self.events = []
        self.phase_time = np.zeros(3)
        self._count = 0
        if not is_admissible(cfg.model.safety, x0):
            self.events.append((0.0, "safety-violation"))

    def event(self, t, kind):
        self.events.append((float(t), kind))

    def segment(self, t_end, dt, phase, x, u, sc):
        self._count += 1
        self.phase_time[phase] += dt
        violating = not is_admissible(self.cfg.model.safety, x)
        if violating:
            self.events.append((float(t_end), "safety-violation"))
        if violating or self._count % self.cfg.record_every == 0:
            self.rows_t.append(float(t_end))
            self.rows_dt.append(float(dt))
            self.rows_phase.append(phase)
            self.rows_x.append(x.copy())
            self.rows_u.append(np.asarray(u, dtype=float).copy())
            self.rows_v.append(lyapunov_value(sc, x))

    def finish(self, liveness_ok) -> SimTrace:
        return SimTrace(np.array(self.rows_t), np.array(self.rows_dt),
                        np.array(self.rows_phase, dtype=np.int8),
                        np.array(self.rows_x), np.array(self.rows_u),
                        np.array(self.rows_v), self.events,
                        phase_time=self.phase_time,
                        liveness_ok=liveness_ok)


def run(cfg: SimConfig) -> SimTrace:
    """Execute the restart protocol until the horizon and return the trace."""
    model = cfg.model
    sc = cfg.sc
    pol = cfg.policy
    rng = np.random.default_rng(cfg.seed)
    rot = RotEmulator()
    rec = _Recorder(cfg, cfg.x0, sc)

    t = 0.0
    x = np.asarray(cfg.x0, dtype=float).copy()
    phase = PHASE_SEI
    u_applied = np.zeros(model.m)
    window_found = False

    # SEI round state
    round_end = pol.t_s
    round_window = find_restart_time(x, model, sc, pol, elapsed=pol.t_s)

    # Normal phase state
    attack_at: Optional[float] = None
    attack_announced = False

    # Rebooting state
    reboot_end = None
    hold_input = np.zeros(model.m)

    def step_plant(u, dt):
        nonlocal x
        sub = max(1, int(np.ceil(dt / cfg.control_period)))
        traj = integrate(model, x, np.asarray(u, dtype=float), dt / sub, sub)
        x = traj.final

    while t < cfg.horizon - 1e-9:
        if phase == PHASE_SEI:
            dt = min(cfg.control_period, round_end - t, cfg.horizon - t)
            u_applied, _ = model.input_bounds.clamp(control(sc, x).u)
            step_plant(u_applied, dt)
            t += dt
            rec.segment(t, dt, PHASE_SEI, x, u_applied, sc)
            if t >= round_end - 1e-9:
                if round_window is not None:
                    accepted = rot.set_restart_time(t, round_window.delta_safe)
                    if accepted:
                        rec.event(t, "restart-set")
                        window_found = True
                        phase = PHASE_NORMAL
                        act = _attack_activation(cfg.scenario)
                        attack_at = None if act is None else t + act
                        attack_announced = False
                else:
                    rec.event(t, "sei-extended")
                    round_end = t + pol.t_s
                    round_window = find_restart_time(x, model, sc, pol,
                                                     elapsed=pol.t_s)
        elif phase == PHASE_NORMAL:
            signal = rot.poll(t)
            if signal is not None:
                rec.event(t, "reboot-start")
                phase = PHASE_REBOOTING
                hold_input = u_applied.copy()
                reboot_end = t + pol.t_r
                continue
            fire_at = rot.fire_at if rot.fire_at is not None else np.inf
            dt = min(cfg.control_period, fire_at - t, cfg.horizon - t)
            # never stall on float dust: force representable progress
            dt = max(dt, 4.0 * np.spacing(max(abs(t), 1.0)))
            attack_active = attack_at is not None and t >= attack_at - 1e-9
            if attack_active and not attack_announced:
                rec.event(t, "attack-active")
                attack_announced = True
            if attack_active:
                if isinstance(cfg.scenario, MaxHeaters):
                    u_cmd = model.input_bounds.upper
                elif isinstance(cfg.scenario, WorstCaseTakeover):
                    u_cmd = adversary_input(model, x, rng)
                elif isinstance(cfg.scenario, KillController):
                    u_cmd = u_applied  # stale actuator command keeps replaying
                elif isinstance(cfg.scenario, SensorCorruption):
                    u_cmd = cfg.mission(cfg.scenario.corrupt(x))
                else:
                    u_cmd = cfg.mission(x)
            else:
                u_cmd = cfg.mission(x)
            u_applied, _ = model.input_bounds.clamp(u_cmd)
            step_plant(u_applied, dt)
            t += dt
            rec.segment(t, dt, PHASE_NORMAL, x, u_applied, sc)
        else:  # PHASE_REBOOTING: actuators replay the last command
            dt = min(cfg.control_period, reboot_end - t, cfg.horizon - t)
            u_applied = hold_input
            step_plant(u_applied, dt)
            t += dt
            rec.segment(t, dt, PHASE_REBOOTING, x, u_applied, sc)
            if t >= reboot_end - 1e-9:
                rec.event(t, "reboot-end")
                rot.rearm()
                phase = PHASE_SEI
                round_end = t + pol.t_s
                round_window = find_restart_time(x, model, sc, pol,
                                                 elapsed=pol.t_s)
    return rec.finish(liveness_ok=window_found)
