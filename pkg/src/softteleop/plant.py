"""Simulated manipulator and simulated motion-capture ground truth.

The plant owns the true per-module state (phi, theta, h), tracks
commanded actuator lengths with a first-order lag, and emits noisy
sensor lines in the observer's wire format.  It stands in for both the
physical robot and the external tracking rig: ``ground_truth`` returns
the true pose either under the same straight-rod model the observer
uses ("chord") or under a constant-curvature arc model, which gives an
evaluation path where the observer's model assumptions are deliberately
violated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import (
    ModulePose,
    ModuleReading,
    ModuleSpec,
    RobotPose,
    base_vertices,
    forward_chain,
    next_base_origin,
    rotation_from_imu,
)
from .observer import format_sensor_line


@dataclass(frozen=True)
class NoiseModel:
    """Sensor corruption: Gaussian jitter plus sporadic TOF spikes.

    The spike term reproduces the sharp random peaks the TOF channel
    shows in practice.  Magnitudes are calibration knobs, not measured
    facts; the angle sigma is tuned so the end-to-end observer error on
    the reference robot lands in the few-percent-of-length regime.
    """

    gauss_sigma_h_mm: float = 0.3
    gauss_sigma_angle_deg: float = 2.0
    spike_prob: float = 0.05
    spike_mag_mm: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.spike_prob <= 1.0:
            raise ValueError(f"spike_prob must be in [0,1], got {self.spike_prob}")
        if self.gauss_sigma_h_mm < 0 or self.gauss_sigma_angle_deg < 0 or self.spike_mag_mm < 0:
            raise ValueError("noise magnitudes must be >= 0")

    @staticmethod
    def silent(seed: int = 0) -> "NoiseModel":
        """A noise model that corrupts nothing."""
        return NoiseModel(0.0, 0.0, 0.0, 0.0, seed)


@dataclass
class ModuleFit:
    """Best-fit module reading for a set of actuator lengths."""

    reading: ModuleReading
    residual_rms_mm: float
    converged: bool
    iterations: int


def _lengths_of(base: np.ndarray, phi: float, theta: float, h: float) -> np.ndarray:
    R = rotation_from_imu(phi, theta)
    top = base @ R.T
    top[:, 2] += h
    return np.linalg.norm(top - base, axis=1)


def _project_box(spec: ModuleSpec, x: np.ndarray) -> np.ndarray:
    lim = spec.tilt_limit_rad
    return np.array([
        min(max(x[0], -lim), lim),
        min(max(x[1], -lim), lim),
        min(max(x[2], spec.min_len_mm), spec.max_len_mm),
    ])


def inverse_module(
    spec: ModuleSpec,
    lengths: Sequence[float],
    seed: ModuleReading | None = None,
    max_iter: int = 100,
    tol_mm: float = 1e-6,
    damping: float = 1e-2,
) -> ModuleFit:
    """Recover (phi, theta, h) that best reproduces the given lengths.

    Damped Gauss-Newton over the squared length residuals with a
    finite-difference Jacobian, projected onto the module's tilt and
    height box each step.  If the residual RMS has not dropped below
    ``tol_mm`` after ``max_iter`` iterations the best parameters found
    so far are returned with ``converged`` False (this is how
    infeasible length combinations surface).
    """
    target = np.asarray(lengths, dtype=float)
    if target.shape != (spec.actuator_count,):
        raise ValueError(
            f"expected {spec.actuator_count} lengths, got {target.shape}"
        )
    base = base_vertices(spec)
    if seed is not None:
        x = np.array([seed.phi_rad, seed.theta_rad, seed.h_mm])
    else:
        x = np.array([0.0, 0.0, float(np.mean(target))])
    x = _project_box(spec, x)

    eps = 1e-6
    lam2 = damping * damping
    best_x = x.copy()
    best_rms = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        r = _lengths_of(base, *x) - target
        rms = math.sqrt(float(np.mean(r * r)))
        if rms < best_rms:
            best_rms = rms
            best_x = x.copy()
        if rms < tol_mm:
            break
        l0 = r + target
        J = np.empty((spec.actuator_count, 3))
        for j in range(3):
            xp = x.copy()
            xp[j] += eps
            J[:, j] = (_lengths_of(base, *xp) - l0) / eps
        step = np.linalg.solve(J.T @ J + lam2 * np.eye(3), -J.T @ r)
        x = _project_box(spec, x + step)
        if np.linalg.norm(step) < 1e-12:
            break

    reading = ModuleReading(h_mm=best_x[2], phi_rad=best_x[0], theta_rad=best_x[1])
    return ModuleFit(
        reading=reading,
        residual_rms_mm=best_rms,
        converged=best_rms < tol_mm,
        iterations=iters,
    )


def _cc_tip_local(reading: ModuleReading) -> np.ndarray:
    """Constant-curvature arc tip in the module's base frame.

    The arc has length s = h and its end tangent matches the top-plate
    normal, so the total arc angle equals the resultant tilt.  The tip
    offsets are (s/a)(1 - cos a) along the bending direction and
    (s/a) sin a axially; the straight limit a -> 0 is taken by series.
    """
    R = rotation_from_imu(reading.phi_rad, reading.theta_rad)
    normal = R[:, 2]
    alpha = math.acos(min(max(normal[2], -1.0), 1.0))
    s = reading.h_mm
    if alpha < 1e-6:
        lateral = s * (alpha / 2.0 - alpha**3 / 24.0)
        axial = s * (1.0 - alpha * alpha / 6.0)
    else:
        lateral = s * (1.0 - math.cos(alpha)) / alpha
        axial = s * math.sin(alpha) / alpha
    horiz = math.hypot(normal[0], normal[1])
    if horiz < 1e-12:
        return np.array([0.0, 0.0, axial])
    u = np.array([normal[0] / horiz, normal[1] / horiz, 0.0])
    return lateral * u + np.array([0.0, 0.0, axial])


def _cc_chain(specs: Sequence[ModuleSpec], readings: Sequence[ModuleReading]) -> RobotPose:
    """Chain under the arc model: tip placement changes, composition doesn't."""
    modules: list[ModulePose] = []
    origin = np.zeros(3)
    R_prev = np.eye(3)
    for spec, reading in zip(specs, readings):
        R_local = rotation_from_imu(reading.phi_rad, reading.theta_rad)
        R_global = R_prev @ R_local
        verts = base_vertices(spec)
        center = origin + R_prev @ _cc_tip_local(reading)
        base_glob = origin + verts @ R_prev.T
        top_glob = center + verts @ R_global.T
        normal = R_global[:, 2].copy()
        modules.append(ModulePose(
            base_origin=origin,
            rotation_local=R_local,
            rotation_global=R_global,
            base_vertices=base_glob,
            top_vertices=top_glob,
            top_center=center,
            top_normal=normal,
            actuator_lengths_mm=np.linalg.norm(top_glob - base_glob, axis=1),
        ))
        origin = next_base_origin(center, normal, spec.plate_offset_mm)
        R_prev = R_global
    return RobotPose(modules=modules, end_effector=modules[-1].top_center.copy())


class Plant:
    """Stateful simulated robot; single owner advances its clock.

    ``mode`` selects how ground truth is computed ("chord" matches the
    observer's model, "constant_curvature" bends each module as an arc).
    All randomness flows from ``noise.seed``.
    """

    TAU_MS = 300.0  # first-order actuator lag

    def __init__(
        self,
        specs: Sequence[ModuleSpec],
        mode: str = "chord",
        noise: NoiseModel | None = None,
        initial_h_mm: float = 40.0,
    ):
        if mode not in ("chord", "constant_curvature"):
            raise ValueError(f"unknown plant mode {mode!r}")
        if not specs:
            raise ValueError("need at least one module spec")
        self.specs = list(specs)
        self.mode = mode
        self.noise = noise if noise is not None else NoiseModel.silent()
        self.rng = np.random.default_rng(self.noise.seed)
        self.time_ms = 0.0
        self.true_readings: list[ModuleReading] = []
        self.commanded_readings: list[ModuleReading] = []
        for spec in self.specs:
            h = min(max(initial_h_mm, spec.min_len_mm), spec.max_len_mm)
            r = ModuleReading(h_mm=h)
            self.true_readings.append(r)
            self.commanded_readings.append(r)

    @property
    def actuator_total(self) -> int:
        return sum(s.actuator_count for s in self.specs)

    def split_lengths(self, flat: Sequence[float]) -> list[np.ndarray]:
        """Split a flat command vector into per-module length arrays."""
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.actuator_total,):
            raise ValueError(
                f"expected {self.actuator_total} lengths, got {flat.shape}"
            )
        out = []
        i = 0
        for spec in self.specs:
            out.append(flat[i:i + spec.actuator_count])
            i += spec.actuator_count
        return out

    def step(self, dt_ms: float, commanded_lengths: Sequence[float] | None = None) -> None:
        """Advance the clock; relax the true state toward the command.

        ``commanded_lengths`` is the flat per-actuator vector (already
        clamped by the caller); None keeps the previous command.
        """
        if dt_ms <= 0:
            raise ValueError(f"dt_ms must be > 0, got {dt_ms}")
        if commanded_lengths is not None:
            per_module = self.split_lengths(commanded_lengths)
            for i, (spec, lens) in enumerate(zip(self.specs, per_module)):
                fit = inverse_module(spec, lens, seed=self.commanded_readings[i])
                self.commanded_readings[i] = fit.reading
        beta = 1.0 - math.exp(-dt_ms / self.TAU_MS)
        for i, (cur, cmd) in enumerate(zip(self.true_readings, self.commanded_readings)):
            self.true_readings[i] = ModuleReading(
                h_mm=cur.h_mm + beta * (cmd.h_mm - cur.h_mm),
                phi_rad=cur.phi_rad + beta * (cmd.phi_rad - cur.phi_rad),
                theta_rad=cur.theta_rad + beta * (cmd.theta_rad - cur.theta_rad),
            )
        self.time_ms += dt_ms

    def read_sensors(self, noise: NoiseModel | None = None) -> str:
        """One noisy sensor line for the current state."""
        nm = noise if noise is not None else self.noise
        noisy: list[ModuleReading] = []
        sigma_ang = math.radians(nm.gauss_sigma_angle_deg)
        for r in self.true_readings:
            h = r.h_mm
            if nm.gauss_sigma_h_mm > 0:
                h += self.rng.normal(0.0, nm.gauss_sigma_h_mm)
            if nm.spike_prob > 0 and self.rng.random() < nm.spike_prob:
                h += nm.spike_mag_mm * (1.0 if self.rng.random() < 0.5 else -1.0)
            phi, theta = r.phi_rad, r.theta_rad
            if sigma_ang > 0:
                phi += self.rng.normal(0.0, sigma_ang)
                theta += self.rng.normal(0.0, sigma_ang)
            # keep the emitted line parseable even under extreme draws
            noisy.append(ModuleReading(h_mm=max(h, 1e-3), phi_rad=phi, theta_rad=theta))
        return format_sensor_line(self.time_ms, noisy)

    def ground_truth(self) -> RobotPose:
        """True pose under the configured geometric model."""
        if self.mode == "chord":
            return forward_chain(self.specs, self.true_readings)
        return _cc_chain(self.specs, self.true_readings)

    def reset(self, initial_h_mm: float = 40.0, seed: int | None = None) -> None:
        """Return to the neutral rest state and reseed the noise stream."""
        self.time_ms = 0.0
        if seed is not None:
            self.noise = replace(self.noise, seed=seed)
        self.rng = np.random.default_rng(self.noise.seed)
        for i, spec in enumerate(self.specs):
            h = min(max(initial_h_mm, spec.min_len_mm), spec.max_len_mm)
            r = ModuleReading(h_mm=h)
            self.true_readings[i] = r
            self.commanded_readings[i] = r
