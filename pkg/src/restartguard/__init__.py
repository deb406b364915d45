"""Restart-based protection toolkit for safety-critical control loops.

Computes verified safe-restart windows by reachability under adversarial
control, emulates the restart protocol (secure execution interval, hardware
restart timer, reboot with actuator hold) under attack scenarios, and
provides the supporting analyses: restart-risk probability curves,
controller availability, and T-squared anomaly detection.
"""

from .plant import (InputBounds, PlantModel, SafetyPolytope, Trajectory,
                    WarehouseParams, helicopter_plant, integrate,
                    is_admissible, linear_derivative, warehouse_derivative,
                    warehouse_plant)
from .safety import (SafetyController, VerifyReport, control, in_recoverable,
                     lyapunov_value, sample_recoverable, verify_sc)
from .reach import (ReachBox, ReachConfig, ReachDivergence, ReachResult,
                    always_inside, inside_recoverable, reach_step, reach_upto)
from .policy import (CellClass, GridAxis, GridSpec, PolicyConfig,
                     RestartTimeMap, SafeWindow, check_conditions,
                     classify_state, find_restart_time, restart_time_map)
from .rot import RestartSignal, RotEmulator, RotStateError
from .simulator import (AttackScenario, KillController, MaxHeaters,
                        MissionController, NoAttack, SensorCorruption,
                        SimConfig, SimTrace, WorstCaseTakeover,
                        availability_of, run, tracking_error)
from .risk import (TabulatedPdf, cdf_of, expected_damage_time, mixture_pdf,
                   normal_pdf, restarted_cdf, restarted_density, uniform_pdf)
from .availability import (Region, availability_breakdown, cell_availability,
                           weighted_availability)
from .anomaly import (Detection, NormalizationBounds, SingularCovariance,
                      T2Profile, build_profile, detect, normalize)
from . import presets

__version__ = "0.1.0"
