import math

import numpy as np
import pytest

from softteleop.filtering import KalmanParams, covariance_fixed_point
from softteleop.geometry import ModuleReading, ModuleSpec, forward_chain
from softteleop.observer import (
    NoEstimateError,
    Observer,
    SensorLineError,
    format_command_line,
    format_sensor_line,
    parse_command_line,
    parse_sensor_line,
)
from softteleop.plant import NoiseModel, Plant


class TestParseSensorLine:
    def test_two_module_frame(self):
        frame = parse_sensor_line("S,1000,40.0,0.0,0.0,40.0,0.0,0.0\n")
        assert frame.t_ms == 1000
        assert len(frame.readings) == 2
        for r in frame.readings:
            assert r.h_mm == 40.0 and r.phi_rad == 0.0 and r.theta_rad == 0.0

    def test_degree_conversion(self):
        frame = parse_sensor_line("S,1100,40.0,10.0,0.0,41.0,0.0,5.0")
        assert frame.readings[0].phi_rad == pytest.approx(math.radians(10.0))
        assert frame.readings[1].theta_rad == pytest.approx(math.radians(5.0))

    def test_non_numeric_names_field_index(self):
        with pytest.raises(SensorLineError, match="field 4"):
            parse_sensor_line("S,1200,40.0,x,0.0,40.0,0.0,0.0")

    def test_bad_field_count(self):
        with pytest.raises(SensorLineError):
            parse_sensor_line("S,1000,40.0,0.0")

    def test_negative_height_names_field(self):
        with pytest.raises(SensorLineError, match="field 3"):
            parse_sensor_line("S,1000,-40.0,0.0,0.0")

    def test_wrong_tag(self):
        with pytest.raises(SensorLineError):
            parse_sensor_line("X,1000,40.0,0.0,0.0")

    def test_round_trip(self):
        readings = [
            ModuleReading(h_mm=41.25, phi_rad=math.radians(3.5), theta_rad=math.radians(-7.25)),
            ModuleReading(h_mm=39.5, phi_rad=0.0, theta_rad=math.radians(1.75)),
        ]
        line = format_sensor_line(1234.0, readings)
        assert line.endswith("\n") and line.count("\n") == 1
        frame = parse_sensor_line(line)
        assert frame.t_ms == 1234.0
        for got, want in zip(frame.readings, readings):
            assert got.h_mm == pytest.approx(want.h_mm, abs=1e-4)
            assert got.phi_rad == pytest.approx(want.phi_rad, abs=1e-6)
            assert got.theta_rad == pytest.approx(want.theta_rad, abs=1e-6)

    def test_wire_format_fraction_digits(self):
        line = format_sensor_line(0.123456, [ModuleReading(h_mm=40.123456)])
        for field in line.strip().split(",")[1:]:
            assert "." not in field or len(field.split(".")[1]) <= 4


class TestCommandLine:
    def test_round_trip(self):
        line = format_command_line([40.0, 41.5, 39.25, 40.0, 40.0, 40.0])
        assert line == "C,40,41.5,39.25,40,40,40\n"
        assert parse_command_line(line) == [40.0, 41.5, 39.25, 40.0, 40.0, 40.0]

    def test_bad_tag(self):
        with pytest.raises(SensorLineError):
            parse_command_line("S,40,40")

    def test_non_numeric(self):
        with pytest.raises(SensorLineError, match="field 3"):
            parse_command_line("C,40,oops")


class TestObserverIngest:
    def test_first_frame_passthrough(self):
        obs = Observer([ModuleSpec()])
        filtered = obs.ingest_line("S,0,43.7,0,0")
        assert filtered[0].h_mm == 43.7

    def test_constant_stream_converges(self):
        obs = Observer([ModuleSpec()])
        obs.ingest_line("S,0,45.0,0,0")
        for i in range(50):
            filtered = obs.ingest_line(f"S,{100 * (i + 1)},45.0,0,0")
        assert filtered[0].h_mm == pytest.approx(45.0, abs=0.01)

    def test_spike_response_bounded_by_gain(self):
        # steady-state gain bound from the covariance fixed point
        params = KalmanParams(q=0.01, r=0.40)
        p_star = covariance_fixed_point(params)
        k_star = (p_star + params.q) / (p_star + params.q + params.r)
        obs = Observer([ModuleSpec()], params)
        for i in range(200):
            obs.ingest_line(f"S,{100 * i},40.0,0,0")
        before = obs.last_readings[0].h_mm
        filtered = obs.ingest_line("S,20000,60.0,0,0")
        moved = filtered[0].h_mm - before
        assert 0 < moved <= 0.59 * 20.0
        assert moved == pytest.approx(k_star * (60.0 - before), rel=1e-6)

    def test_angles_pass_through_unfiltered(self):
        obs = Observer([ModuleSpec()])
        obs.ingest_line("S,0,40.0,5.0,0")
        filtered = obs.ingest_line("S,100,40.0,-5.0,2.0")
        assert filtered[0].phi_rad == pytest.approx(math.radians(-5.0))
        assert filtered[0].theta_rad == pytest.approx(math.radians(2.0))

    def test_module_count_mismatch(self):
        obs = Observer([ModuleSpec()] * 2)
        with pytest.raises(ValueError):
            obs.ingest_line("S,0,40.0,0,0")


class TestObserverEstimate:
    def test_estimate_before_ingest(self):
        obs = Observer([ModuleSpec()])
        with pytest.raises(NoEstimateError):
            obs.estimate()

    def test_reference_height(self):
        obs = Observer([ModuleSpec(), ModuleSpec()])
        obs.ingest_line("S,0,40.0,0,0,40.0,0,0")
        pose = obs.estimate()
        assert np.allclose(pose.end_effector, [0, 0, 85], atol=1e-9)

    def test_single_module(self):
        obs = Observer([ModuleSpec()])
        obs.ingest_line("S,0,52.5,0,0")
        assert np.allclose(obs.estimate().end_effector, [0, 0, 52.5], atol=1e-9)

    def test_estimate_is_pure_given_state(self):
        obs = Observer([ModuleSpec(), ModuleSpec()])
        obs.ingest_line("S,0,40.0,2.0,1.0,41.0,-1.0,0.5")
        a = obs.estimate()
        b = obs.estimate()
        assert np.array_equal(a.end_effector, b.end_effector)

    def test_zero_noise_matches_plant_truth(self):
        specs = [ModuleSpec(), ModuleSpec()]
        plant = Plant(specs, "chord", NoiseModel.silent())
        obs = Observer(specs)
        for _ in range(20):
            obs.ingest_line(plant.read_sensors())
            est = obs.estimate()
            truth = plant.ground_truth()
            assert np.allclose(est.end_effector, truth.end_effector, atol=1e-6)
            plant.step(100.0)

    def test_staleness(self):
        obs = Observer([ModuleSpec()])
        assert obs.is_stale(0.0, 100.0)
        obs.ingest_line("S,1000,40.0,0,0")
        assert not obs.is_stale(1400.0, 100.0)
        assert obs.is_stale(1501.0, 100.0)
