import math

import numpy as np
import pytest

from softteleop.control import (
    ControlState,
    PidGains,
    TargetCommand,
    control_tick,
    inverse_kinematics,
    pid_step,
    run_to_target,
    target_in_box,
    workspace_box,
)
from softteleop.geometry import ModuleReading, ModuleSpec, actuator_lengths, forward_chain
from softteleop.observer import Observer
from softteleop.plant import NoiseModel, Plant

SPECS = [ModuleSpec(), ModuleSpec()]
NEUTRAL = [ModuleReading(40.0), ModuleReading(40.0)]


def sample_in_limit_readings(rng, specs):
    out = []
    for spec in specs:
        while True:
            r = ModuleReading(
                h_mm=rng.uniform(spec.min_len_mm, spec.max_len_mm),
                phi_rad=rng.uniform(-spec.tilt_limit_rad, spec.tilt_limit_rad),
                theta_rad=rng.uniform(-spec.tilt_limit_rad, spec.tilt_limit_rad),
            )
            lens = actuator_lengths(spec, r)
            if lens.min() >= spec.min_len_mm and lens.max() <= spec.max_len_mm:
                out.append(r)
                break
    return out


class TestPidStep:
    def test_zero_error_zero_output(self):
        ctrl, corr = pid_step(ControlState(), PidGains(), np.zeros(3), 100.0)
        assert np.allclose(corr, 0.0)

    def test_pure_proportional(self):
        gains = PidGains(kp=1.0, ki=0.0, kd=0.0)
        _, corr = pid_step(ControlState(), gains, np.array([3.0, 0.0, 0.0]), 100.0)
        assert np.allclose(corr, [3.0, 0.0, 0.0])

    def test_integral_discrete_sum(self):
        # oracle: constant error for n steps integrates to ki * n * dt * e
        gains = PidGains(kp=0.0, ki=0.5, kd=0.0)
        e = np.array([2.0, -1.0, 0.5])
        dt_ms = 100.0
        ctrl = ControlState()
        n = 7
        for _ in range(n):
            ctrl, corr = pid_step(ctrl, gains, e, dt_ms)
        expected = gains.ki * n * (dt_ms / 1000.0) * e
        assert np.allclose(corr, expected, atol=1e-12)

    def test_integral_clamp(self):
        gains = PidGains(kp=0.0, ki=1.0, kd=0.0, i_max_mm=5.0)
        ctrl = ControlState()
        e = np.array([100.0, 0.0, 0.0])
        for _ in range(200):
            ctrl, corr = pid_step(ctrl, gains, e, 100.0)
        assert corr[0] == pytest.approx(5.0)

    def test_derivative_term(self):
        gains = PidGains(kp=0.0, ki=0.0, kd=0.2)
        ctrl = ControlState()
        ctrl, _ = pid_step(ctrl, gains, np.array([1.0, 0.0, 0.0]), 100.0)
        _, corr = pid_step(ctrl, gains, np.array([3.0, 0.0, 0.0]), 100.0)
        assert corr[0] == pytest.approx(0.2 * (3.0 - 1.0) / 0.1)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            pid_step(ControlState(), PidGains(), np.zeros(3), 0.0)


class TestWorkspaceBox:
    def test_reference_robot_box(self):
        xb, yb, zb = workspace_box(SPECS)
        assert zb == (65.0, 125.0)
        assert xb == (-62.5, 62.5)

    def test_first_platform_box(self):
        _, _, zb = workspace_box(SPECS, module_index=0)
        assert zb == (30.0, 60.0)

    def test_membership(self):
        assert target_in_box(SPECS, TargetCommand(1, (10.0, 0.0, 85.0)))
        assert not target_in_box(SPECS, TargetCommand(1, (500.0, 0.0, 85.0)))
        assert not target_in_box(SPECS, TargetCommand(5, (0.0, 0.0, 85.0)))
        assert not target_in_box(SPECS, TargetCommand(1, (0.0, math.nan, 85.0)))


class TestInverseKinematics:
    def test_rest_target_gives_zero_tilt(self):
        ik = inverse_kinematics(SPECS, TargetCommand(1, (0.0, 0.0, 85.0)), NEUTRAL)
        assert ik.reachable
        for r in ik.readings:
            assert abs(r.phi_rad) < 1e-3 and abs(r.theta_rad) < 1e-3
        fk = forward_chain(SPECS, ik.readings).end_effector
        assert np.linalg.norm(fk - [0, 0, 85]) < 0.1

    def test_fk_round_trip(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            readings = sample_in_limit_readings(rng, SPECS)
            target = forward_chain(SPECS, readings).end_effector
            ik = inverse_kinematics(SPECS, TargetCommand(1, tuple(target)), NEUTRAL)
            assert ik.reachable
            fk = forward_chain(SPECS, ik.readings).end_effector
            assert np.linalg.norm(fk - target) < 0.1

    def test_first_platform_moves_only_vertically(self):
        # the fixed-pivot model keeps a module's own centre on its base axis
        ik = inverse_kinematics(SPECS, TargetCommand(0, (0.0, 0.0, 45.0)), NEUTRAL)
        assert ik.reachable
        pose = forward_chain(SPECS, ik.readings)
        assert np.linalg.norm(pose.modules[0].top_center - [0, 0, 45]) < 0.1
        # untouched trailing module keeps its seed reading
        assert ik.readings[1].h_mm == NEUTRAL[1].h_mm

    def test_middle_platform_lateral_target_uses_lower_module(self):
        specs3 = [ModuleSpec()] * 3
        neutral3 = [ModuleReading(40.0)] * 3
        ik = inverse_kinematics(specs3, TargetCommand(1, (3.0, 0.0, 85.0)), neutral3)
        assert ik.reachable
        pose = forward_chain(specs3, ik.readings)
        assert np.linalg.norm(pose.modules[1].top_center - [3, 0, 85]) < 0.1
        # only the module below the platform can generate the lateral offset
        assert abs(ik.readings[0].phi_rad) + abs(ik.readings[0].theta_rad) > 1e-3

    def test_unreachable_flagged(self):
        ik = inverse_kinematics(SPECS, TargetCommand(1, (500.0, 0.0, 85.0)), NEUTRAL)
        assert not ik.reachable
        assert ik.pos_error_mm > 100.0

    def test_solution_respects_limits(self):
        rng = np.random.default_rng(78)
        for _ in range(10):
            readings = sample_in_limit_readings(rng, SPECS)
            target = forward_chain(SPECS, readings).end_effector
            ik = inverse_kinematics(SPECS, TargetCommand(1, tuple(target)), NEUTRAL)
            for spec, r in zip(SPECS, ik.readings):
                assert abs(r.phi_rad) <= spec.tilt_limit_rad + 1e-9
                assert abs(r.theta_rad) <= spec.tilt_limit_rad + 1e-9
                lens = actuator_lengths(spec, r)
                assert lens.max() <= spec.max_len_mm + 1e-6
                assert lens.min() >= spec.min_len_mm - 1e-6


class TestRunToTarget:
    def test_already_at_target_converges_immediately(self):
        plant = Plant(SPECS, noise=NoiseModel.silent())
        obs = Observer(SPECS)
        outcome, trace = run_to_target(
            plant, obs, TargetCommand(1, (0.0, 0.0, 85.0))
        )
        assert outcome == "converged"
        assert len(trace) == 1
        assert trace[0].command_mm is None  # no commands issued at all

    def test_step_target_converges(self):
        plant = Plant(SPECS, noise=NoiseModel.silent())
        obs = Observer(SPECS)
        outcome, trace = run_to_target(plant, obs, TargetCommand(1, (10.0, 0.0, 85.0)))
        assert outcome == "converged"
        assert trace[-1].error_norm_mm <= 3.0
        assert (trace[-1].t_ms - trace[0].t_ms) <= 20000.0
        for entry in trace:
            if entry.command_mm is None:
                continue
            per_module = np.asarray(entry.command_mm).reshape(2, 3)
            for spec, lens in zip(SPECS, per_module):
                assert lens.min() >= spec.min_len_mm and lens.max() <= spec.max_len_mm

    def test_kp_only_error_non_increasing_after_transient(self):
        plant = Plant(SPECS, noise=NoiseModel.silent())
        obs = Observer(SPECS)
        gains = PidGains(kp=0.5, ki=0.0, kd=0.0)
        outcome, trace = run_to_target(
            plant, obs, TargetCommand(1, (8.0, 0.0, 85.0)), gains=gains
        )
        assert outcome == "converged"
        errs = [t.error_norm_mm for t in trace]
        settled = errs[min(20, len(errs) - 1):]
        for a, b in zip(settled, settled[1:]):
            assert b <= a + 1e-9

    def test_unreachable_times_out_with_flag(self):
        plant = Plant(SPECS, noise=NoiseModel.silent())
        obs = Observer(SPECS)
        ctrl = ControlState(timeout_ms=3000.0)
        outcome, trace = run_to_target(
            plant, obs, TargetCommand(1, (500.0, 0.0, 85.0)), ctrl=ctrl
        )
        assert outcome == "timeout"
        assert any(not t.ik_reachable for t in trace)

    def test_converges_with_noise(self):
        plant = Plant(SPECS, noise=NoiseModel(seed=4))
        obs = Observer(SPECS)
        outcome, trace = run_to_target(plant, obs, TargetCommand(1, (6.0, 0.0, 85.0)))
        assert outcome == "converged"


class TestControlTick:
    def test_converged_tick_returns_no_command(self):
        ctrl = ControlState()
        position = np.array([0.0, 0.0, 85.0])
        ctrl2, command, err, ok = control_tick(
            SPECS, ctrl, PidGains(), TargetCommand(1, (0.0, 0.0, 86.0)),
            position, NEUTRAL, 100.0,
        )
        assert command is None and err <= ctrl.tol_mm and ok

    def test_active_tick_emits_clamped_lengths(self):
        ctrl = ControlState()
        position = np.array([0.0, 0.0, 85.0])
        _, command, err, _ = control_tick(
            SPECS, ctrl, PidGains(), TargetCommand(1, (10.0, 0.0, 85.0)),
            position, NEUTRAL, 100.0,
        )
        assert err > ctrl.tol_mm
        assert len(command) == 6
        for spec, lens in zip(SPECS, np.asarray(command).reshape(2, 3)):
            assert lens.min() >= spec.min_len_mm and lens.max() <= spec.max_len_mm
