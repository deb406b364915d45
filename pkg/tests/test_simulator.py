import numpy as np
import pytest

import restartguard as rg
from restartguard.simulator import (PHASE_NORMAL, PHASE_REBOOTING, PHASE_SEI,
                                    KillController, MaxHeaters,
                                    MissionController, NoAttack,
                                    SensorCorruption, SimConfig, SimTrace,
                                    WorstCaseTakeover, availability_of,
                                    adversary_input, run, tracking_error)


@pytest.fixture(scope="module")
def warehouse_max_heaters_trace(warehouse_model, warehouse_sc, warehouse_policy):
    cfg = SimConfig(model=warehouse_model, sc=warehouse_sc,
                    policy=warehouse_policy,
                    x0=np.array([25.0, 25.0]), horizon=12_000.0,
                    control_period=1.0, scenario=MaxHeaters(45.0),
                    record_every=5)
    return run(cfg), cfg


@pytest.fixture(scope="module")
def heli_takeover_trace(heli_model, heli_sc, heli_policy):
    cfg = SimConfig(model=heli_model, sc=heli_sc, policy=heli_policy,
                    x0=np.zeros(6), horizon=20.0, control_period=0.02,
                    scenario=WorstCaseTakeover(), seed=3)
    return run(cfg), cfg


class TestWarehouseScenarios:
    def test_no_attack_stays_safe_one_day(self, warehouse_model, warehouse_sc,
                                          warehouse_policy):
        model = warehouse_model.with_disturbance([30.0])
        sc = rg.presets.warehouse_controller(model)
        cfg = SimConfig(model=model, sc=sc, policy=warehouse_policy,
                        x0=np.array([25.0, 25.0]), horizon=86_400.0,
                        control_period=1.0, scenario=NoAttack(),
                        record_every=20)
        trace = run(cfg)
        assert trace.violation_count == 0
        assert trace.liveness_ok

    def test_max_heaters_never_tops_the_band(self, warehouse_max_heaters_trace):
        trace, _ = warehouse_max_heaters_trace
        assert trace.violation_count == 0
        assert trace.states[:, 1].max() <= 30.0
        # the attack actually ran and pushed the room up
        assert trace.event_times("attack-active")
        assert trace.states[:, 1].max() > 27.0

    def test_max_heaters_recovers_toward_band_center(self, warehouse_max_heaters_trace):
        trace, _ = warehouse_max_heaters_trace
        reboots = trace.event_times("reboot-end")
        assert reboots, "expected at least one full restart cycle"
        t0 = reboots[0]
        # during the secure interval after the reboot the room is pulled back
        after = (trace.times > t0) & (trace.times < t0 + 2000.0) \
            & (trace.phases == PHASE_SEI)
        room = trace.states[after, 1]
        assert room.size > 10
        assert room[-1] < room[0]

    def test_availability_high_for_slow_plant(self, warehouse_max_heaters_trace):
        trace, _ = warehouse_max_heaters_trace
        assert availability_of(trace) > 0.95


class TestHelicopterTakeover:
    def test_no_safety_violation(self, heli_takeover_trace):
        trace, _ = heli_takeover_trace
        assert trace.violation_count == 0

    def test_sei_and_reboot_dominate(self, heli_takeover_trace):
        # the worst-case attacker destabilizes right after every SEI, so the
        # system spends most of its life recovering rather than in Normal
        trace, _ = heli_takeover_trace
        recovery = trace.phase_time[PHASE_SEI] + trace.phase_time[PHASE_REBOOTING]
        assert recovery > trace.phase_time[PHASE_NORMAL]

    def test_actuator_hold_during_reboot(self, heli_takeover_trace):
        trace, _ = heli_takeover_trace
        for k in range(1, trace.times.size):
            if trace.phases[k] == PHASE_REBOOTING and trace.phases[k - 1] in (
                    PHASE_NORMAL, PHASE_REBOOTING):
                np.testing.assert_array_equal(trace.inputs[k],
                                              trace.inputs[k - 1])

    def test_rot_discipline(self, heli_takeover_trace):
        trace, cfg = heli_takeover_trace
        sets = trace.event_times("restart-set")
        starts = trace.event_times("reboot-start")
        ends = trace.event_times("reboot-end")
        # one set per cycle, reboot follows each set (up to horizon cutoff)
        assert len(sets) >= 2
        assert len(sets) - len(starts) in (0, 1)
        assert len(starts) - len(ends) in (0, 1)
        for t_end, t_start in zip(ends, starts):
            assert t_end - t_start == pytest.approx(cfg.policy.t_r, abs=1e-6)


class TestSeiExtension:
    def test_extension_when_window_unavailable(self, warehouse_model,
                                               warehouse_sc):
        # a huge first candidate cannot pass, and one iteration per round
        # leaves no time to shrink it: the SEI must extend, with the safety
        # controller holding the plant meanwhile
        pol = rg.presets.warehouse_policy(delta_init=50_000.0,
                                          inc_step=1000.0, max_iters=1)
        cfg = SimConfig(model=warehouse_model, sc=warehouse_sc, policy=pol,
                        x0=np.array([25.0, 25.0]), horizon=300.0,
                        control_period=1.0, scenario=NoAttack())
        trace = run(cfg)
        assert trace.event_times("sei-extended")
        assert not trace.liveness_ok
        assert np.all(trace.phases == PHASE_SEI)
        assert trace.violation_count == 0


class TestSensorCorruption:
    def test_plant_integrates_truth_not_the_view(self, warehouse_model,
                                                 warehouse_sc, warehouse_policy):
        # replacement corruption freezes the controller's view at the
        # setpoint, so after activation it applies (nearly) pure feedforward
        scenario = SensorCorruption(activation=0.0, mode="replacement",
                                    values=(25.0, 25.0))
        cfg = SimConfig(model=warehouse_model, sc=warehouse_sc,
                        policy=warehouse_policy, x0=np.array([25.0, 25.0]),
                        horizon=3000.0, control_period=1.0, scenario=scenario)
        trace = run(cfg)
        normal = trace.phases == PHASE_NORMAL
        assert normal.sum() > 100
        u_room = trace.inputs[normal, 1]
        np.testing.assert_allclose(u_room, warehouse_sc.feedforward[1],
                                   atol=1e-6)
        # truth still follows the physics: with the mission controller blind,
        # the room drifts away from the exact setpoint over the cycle
        drift = np.abs(trace.states[normal, 1] - 25.0)
        assert drift.max() > 0.01


class TestMissionController:
    def test_zero_correction_at_setpoint(self, warehouse_sc):
        mc = MissionController.from_sc(warehouse_sc)
        u = mc(warehouse_sc.center)
        np.testing.assert_allclose(u, warehouse_sc.feedforward, atol=1e-12)

    def test_step_response_bounded(self, warehouse_model, warehouse_sc):
        mc = MissionController.from_sc(warehouse_sc,
                                       setpoint=np.array([25.0, 27.0]))
        u, _ = warehouse_model.input_bounds.clamp(mc(np.array([25.0, 25.0])))
        assert np.all(u >= warehouse_model.input_bounds.lower)
        assert np.all(u <= warehouse_model.input_bounds.upper)

    def test_mission_tracking_beats_safety_only(self, warehouse_model,
                                                warehouse_sc, warehouse_policy):
        setpoint = np.array([25.0, 27.0])
        common = dict(model=warehouse_model, sc=warehouse_sc,
                      policy=warehouse_policy, x0=np.array([25.0, 25.0]),
                      horizon=6000.0, control_period=1.0, scenario=NoAttack(),
                      record_every=5)
        with_mission = run(SimConfig(
            mission=MissionController.from_sc(warehouse_sc, setpoint), **common))
        safety_only = run(SimConfig(mission=None, **common))
        assert (tracking_error(with_mission, setpoint)
                < tracking_error(safety_only, setpoint))


class TestAvailabilityOf:
    def test_all_normal_is_one(self):
        trace = SimTrace(np.arange(3.0), np.array([0.0, 1.0, 1.0]),
                         np.array([PHASE_NORMAL] * 3), np.zeros((3, 1)),
                         np.zeros((3, 1)), np.zeros(3), [],
                         phase_time=np.array([0.0, 2.0, 0.0]))
        assert availability_of(trace) == 1.0

    def test_single_cycle_formula(self):
        # delta_r 1.0, t_s 0.2, t_r 0.39 -> 1.0 / 1.59
        trace = SimTrace(np.zeros(1), np.zeros(1), np.zeros(1, dtype=int),
                         np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), [],
                         phase_time=np.array([0.2, 1.0, 0.39]))
        assert availability_of(trace) == pytest.approx(1.0 / 1.59)
        assert availability_of(trace) == pytest.approx(0.6289, abs=1e-4)

    def test_empty_trace_rejected(self):
        trace = SimTrace(np.zeros(1), np.zeros(1), np.zeros(1, dtype=int),
                         np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), [],
                         phase_time=np.zeros(3))
        with pytest.raises(ValueError):
            availability_of(trace)


class TestAdversaryInput:
    def test_pushes_room_heater_to_ceiling(self, warehouse_model, rng):
        # nearest face of the band from a hot room is the 30-degree ceiling,
        # which the room conditioner can push toward directly
        u = adversary_input(warehouse_model, np.array([25.0, 29.0]), rng)
        assert u[1] == warehouse_model.input_bounds.upper[1]

    def test_bang_bang_on_position_faces(self, heli_model, rng):
        # helicopter safety rows act on angles, which inputs reach only
        # through the velocities; the second-order term decides
        u = adversary_input(heli_model, np.zeros(6), rng)
        lo, hi = heli_model.input_bounds.lower, heli_model.input_bounds.upper
        assert all(v in (lo[i], hi[i]) for i, v in enumerate(u))


class TestTraceExport:
    def test_csv_schema(self, heli_takeover_trace, tmp_path):
        trace, _ = heli_takeover_trace
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == ["t", "phase", "x1", "x2", "x3", "x4", "x5", "x6",
                          "u1", "u2", "V", "event"]
